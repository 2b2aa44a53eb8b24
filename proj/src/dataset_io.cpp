#include "distill/dataset_io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "distill/error.hpp"
#include "distill/log.hpp"

namespace distill {

using nlohmann::json;

json to_json(const Answer& answer) {
    json j;
    j["letter"] = answer.letter ? json(std::string(1, *answer.letter)) : json(nullptr);
    j["text"] = answer.text;
    return j;
}

json to_json(const Instance& instance) {
    json choices = json::array();
    for (const auto& c : instance.choices) choices.push_back({{"letter", std::string(1, c.letter)}, {"text", c.text}});
    return {{"id", instance.id}, {"question", instance.question}, {"choices", std::move(choices)}, {"gold", to_json(instance.gold)}};
}

json to_json(const Demonstration& demo) {
    json j = to_json(demo.instance);
    j["explanation"] = demo.explanation;
    return j;
}

namespace {

char parse_letter(const json& j, const char* field) {
    const auto s = j.get<std::string>();
    if (s.size() != 1 || s[0] < 'a' || s[0] > 'z') {
        throw std::invalid_argument(std::string(field) + " must be a single lowercase letter, got \"" + s + "\"");
    }
    return s[0];
}

}  // namespace

Answer answer_from_json(const json& j) {
    Answer a;
    if (j.contains("letter") && !j.at("letter").is_null()) a.letter = parse_letter(j.at("letter"), "gold.letter");
    a.text = j.at("text").get<std::string>();
    return a;
}

Instance instance_from_json(const json& j) {
    Instance inst;
    inst.id = j.at("id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    if (j.contains("choices")) {
        for (const auto& c : j.at("choices")) {
            inst.choices.push_back({parse_letter(c.at("letter"), "choice.letter"), c.at("text").get<std::string>()});
        }
    }
    inst.gold = answer_from_json(j.at("gold"));
    return inst;
}

namespace {

template <typename Fn>
void for_each_record(const std::string& jsonl, Fn&& fn) {
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
            if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
        } catch (const std::exception& e) {
            throw Error(errc::malformed_record, "line " + std::to_string(line_no) + ": " + e.what(),
                        {{"line", line_no}, {"reason", e.what()}});
        }
        fn(j, line_no);
    }
}

Instance checked_instance(const json& j, std::size_t line_no, DatasetKind kind) {
    Instance inst;
    try {
        inst = instance_from_json(j);
    } catch (const std::exception& e) {
        throw Error(errc::malformed_record, "line " + std::to_string(line_no) + ": " + e.what(),
                    {{"line", line_no}, {"reason", e.what()}});
    }
    try {
        validate_instance(inst, kind);
    } catch (Error& e) {
        auto details = e.details();
        details["line"] = line_no;
        throw Error(e.code(), e.what(), details);
    }
    return inst;
}

}  // namespace

Dataset parse_dataset(const std::string& jsonl, DatasetKind kind) {
    Dataset ds{kind, {}};
    for_each_record(jsonl, [&](const json& j, std::size_t line_no) { ds.instances.push_back(checked_instance(j, line_no, kind)); });
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetKind kind) {
    Dataset ds = parse_dataset(read_file(path), kind);
    if (ds.instances.empty()) {
        log::warn("dataset " + path.string() + " contains no instances");
    } else {
        log::info("loaded " + std::to_string(ds.size()) + " instances from " + path.string());
    }
    return ds;
}

DemoSet parse_demos(const std::string& jsonl, DatasetKind kind, std::size_t count) {
    DemoSet set{kind, {}};
    std::size_t found = 0;
    for_each_record(jsonl, [&](const json& j, std::size_t line_no) {
        ++found;
        if (set.demos.size() >= count) return;
        Demonstration demo{checked_instance(j, line_no, kind), {}};
        if (!j.contains("explanation") || !j.at("explanation").is_string() || j.at("explanation").get<std::string>().empty()) {
            throw Error(errc::malformed_record, "line " + std::to_string(line_no) + ": demonstration needs a non-empty explanation",
                        {{"line", line_no}, {"reason", "missing explanation"}});
        }
        demo.explanation = j.at("explanation").get<std::string>();
        set.demos.push_back(std::move(demo));
    });
    if (found < count) {
        throw Error(errc::too_few_demos,
                    "found " + std::to_string(found) + " demonstrations, need " + std::to_string(count),
                    {{"found", found}, {"required", count}});
    }
    return set;
}

DemoSet load_demos(const std::filesystem::path& path, DatasetKind kind, std::size_t count) {
    return parse_demos(read_file(path), kind, count);
}

std::string serialize_dataset(const Dataset& dataset) {
    std::string out;
    for (const auto& inst : dataset.instances) {
        out += to_json(inst).dump();
        out += '\n';
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io_error, "cannot open " + path.string(), {{"path", path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
           std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(errc::io_error, "cannot write " + tmp.string(), {{"path", tmp.string()}});
        out << contents;
        out.flush();
        if (!out) throw Error(errc::io_error, "short write to " + tmp.string(), {{"path", tmp.string()}});
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(errc::io_error, "rename to " + path.string() + " failed: " + ec.message(), {{"path", path.string()}});
    }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::vector<json> rows;
    for_each_record(read_file(path), [&](const json& j, std::size_t) { rows.push_back(j); });
    return rows;
}

std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

}  // namespace distill
