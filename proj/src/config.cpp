#include "distill/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "distill/dataset_io.hpp"
#include "distill/error.hpp"
#include "distill/orchestrator.hpp"

namespace distill {

namespace {

std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
}

std::string unquote(std::string v) {
    v = trim(v);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) return v.substr(1, v.size() - 2);
    return v;
}

std::string canonical_key(std::string k) {
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
        throw Error(errc::config_invalid, "config key " + key + ": \"" + value + "\" is not a valid number",
                    {{"key", key}, {"value", value}});
    }
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = unquote(item);
        if (!item.empty()) out.push_back(parse_number<T>(key, item));
    }
    return out;
}

template <typename Fn>
auto parse_enum(const std::string& key, const std::string& value, Fn&& fn) {
    try {
        return fn(value);
    } catch (const Error& e) {
        throw Error(errc::config_invalid, "config key " + key + ": " + e.what(), {{"key", key}, {"value", value}});
    }
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Strip comments outside quotes.
        char quote = 0;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (quote) {
                if (line[i] == quote) quote = 0;
            } else if (line[i] == '"' || line[i] == '\'') {
                quote = line[i];
            } else if (line[i] == '#') {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(errc::config_invalid, "config line " + std::to_string(line_no) + ": expected key = value", {{"line", line_no}});
        }
        const auto key = canonical_key(trim(line.substr(0, eq)));
        auto value = trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') throw Error(errc::config_invalid, "config line " + std::to_string(line_no) + ": unterminated list");
            std::stringstream ss(value.substr(1, value.size() - 2));
            std::string item, joined;
            while (std::getline(ss, item, ',')) {
                item = unquote(item);
                if (item.empty()) continue;
                if (!joined.empty()) joined += ',';
                joined += item;
            }
            value = joined;
        } else {
            value = unquote(value);
        }
        if (out.contains(key)) throw Error(errc::config_invalid, "config key " + key + " given twice", {{"key", key}});
        out[key] = value;
    }
    return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) { return parse_config_text(read_file(path)); }

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "dataset",  "kind",        "dev",          "test",        "demos",         "rp_demos",   "num_demos",
        "method",   "mode",        "style",        "task",        "alpha_grid",    "alpha",      "seed",
        "n_runs",   "sizes",       "n_splits",     "model_tag",   "trainer",       "train",      "matrix",
        "annotated", "predictions", "runs",        "votes",       "shuffle_key",   "endpoint",   "model",
        "cache_dir", "replay_dir", "parallelism",  "rate_limit",  "rate_window_ms", "retry_attempts",
        "retry_initial_ms", "max_tokens", "temperature", "out_dir"};
    return keys;
}

PipelineConfig PipelineConfig::resolve(const ConfigMap& file_values, const ConfigMap& flag_values) {
    ConfigMap merged;
    const auto& keys = config_keys();
    for (const auto* source : {&file_values, &flag_values}) {
        for (const auto& [raw_key, value] : *source) {
            const auto key = canonical_key(raw_key);
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
                throw Error(errc::config_invalid, "unknown config key: " + key, {{"key", key}});
            }
            merged[key] = value;
        }
    }

    PipelineConfig c;
    c.resolved = merged;
    auto has = [&](const char* k) { return merged.contains(k) && !merged.at(k).empty(); };
    auto str = [&](const char* k) { return merged.at(k); };

    if (has("dataset")) c.dataset = str("dataset");
    if (has("kind")) c.kind = parse_enum("kind", str("kind"), dataset_kind_from_string);
    if (has("dev")) c.dev = str("dev");
    if (has("test")) c.test = str("test");
    if (has("demos")) c.demos = str("demos");
    if (has("rp_demos")) c.rp_demos = str("rp_demos");
    if (has("num_demos")) c.num_demos = parse_number<std::size_t>("num_demos", str("num_demos"));
    if (has("method")) c.method = parse_enum("method", str("method"), generation_method_from_string);
    if (has("mode")) c.mode = parse_enum("mode", str("mode"), mt_mode_from_string);
    if (has("style")) c.style = parse_enum("style", str("style"), prompt_style_from_string);
    if (has("task")) c.task = str("task");
    if (has("alpha_grid")) c.alpha_grid = parse_enum("alpha_grid", str("alpha_grid"), parse_alpha_grid);
    if (has("alpha")) c.alpha = parse_number<double>("alpha", str("alpha"));
    if (has("seed")) c.seed = parse_number<std::uint64_t>("seed", str("seed"));
    if (has("n_runs")) c.n_runs = parse_number<std::size_t>("n_runs", str("n_runs"));
    if (has("sizes")) c.sizes = parse_list<std::size_t>("sizes", str("sizes"));
    if (has("n_splits")) c.n_splits = parse_number<std::size_t>("n_splits", str("n_splits"));
    if (has("model_tag")) c.model_tag = str("model_tag");
    if (has("trainer")) c.trainer = str("trainer");
    if (has("train")) c.train = str("train");
    if (has("matrix")) c.matrix = str("matrix");
    if (has("annotated")) c.annotated = str("annotated");
    if (has("predictions")) c.predictions = str("predictions");
    if (has("runs")) c.runs = parse_list<double>("runs", str("runs"));
    if (has("votes")) c.votes = str("votes");
    if (has("shuffle_key")) c.shuffle_key = str("shuffle_key");
    if (has("endpoint")) c.endpoint = str("endpoint");
    if (has("model")) c.model = str("model");
    if (has("cache_dir")) c.cache_dir = str("cache_dir");
    if (has("replay_dir")) c.replay_dir = str("replay_dir");
    if (has("parallelism")) c.parallelism = parse_number<std::size_t>("parallelism", str("parallelism"));
    if (has("rate_limit")) c.rate_limit = parse_number<std::size_t>("rate_limit", str("rate_limit"));
    if (has("rate_window_ms")) c.rate_window_ms = parse_number<std::size_t>("rate_window_ms", str("rate_window_ms"));
    if (has("retry_attempts")) c.retry_attempts = parse_number<int>("retry_attempts", str("retry_attempts"));
    if (has("retry_initial_ms")) c.retry_initial_ms = parse_number<std::size_t>("retry_initial_ms", str("retry_initial_ms"));
    if (has("max_tokens")) c.max_tokens = parse_number<int>("max_tokens", str("max_tokens"));
    if (has("temperature")) c.temperature = parse_number<double>("temperature", str("temperature"));
    if (has("out_dir")) c.out_dir = str("out_dir");

    if (c.alpha_grid.empty()) c.alpha_grid = default_alpha_grid;
    if (c.parallelism < 1) throw Error(errc::config_invalid, "parallelism must be >= 1", {{"key", "parallelism"}});
    if (c.temperature < 0) throw Error(errc::config_invalid, "temperature must be >= 0", {{"key", "temperature"}});
    if (c.max_tokens < 1) throw Error(errc::config_invalid, "max_tokens must be >= 1", {{"key", "max_tokens"}});
    if (c.retry_attempts < 1) throw Error(errc::config_invalid, "retry_attempts must be >= 1", {{"key", "retry_attempts"}});
    if (c.n_runs < 1) throw Error(errc::config_invalid, "n_runs must be >= 1", {{"key", "n_runs"}});
    if (c.task != "grid" && c.task != "fewshot" && c.task != "matrix") {
        throw Error(errc::config_invalid, "task must be grid, fewshot or matrix", {{"key", "task"}, {"value", c.task}});
    }
    if (c.cache_dir.empty()) c.cache_dir = c.out_dir / "cache";
    return c;
}

DecodeParams PipelineConfig::decode_params() const {
    DecodeParams p;
    p.temperature = temperature;
    p.max_tokens = max_tokens;
    return p;
}

GatewayConfig PipelineConfig::gateway_config() const {
    GatewayConfig g;
    g.cache_dir = cache_dir;
    g.max_in_flight = parallelism;
    g.rate_limit_requests = rate_limit;
    g.rate_limit_window = std::chrono::milliseconds(rate_window_ms);
    g.retry.max_attempts = retry_attempts;
    g.retry.initial_delay = std::chrono::milliseconds(retry_initial_ms);
    return g;
}

std::unique_ptr<Gateway> PipelineConfig::make_gateway() const {
    std::unique_ptr<Backend> backend;
    if (!replay_dir.empty()) {
        backend = std::make_unique<ReplayBackend>(replay_dir, model);
    } else if (!endpoint.empty()) {
        const char* key = std::getenv("LLM_API_KEY");
        backend = std::make_unique<HttpBackend>(HttpBackendConfig{endpoint, model, key ? key : "", std::chrono::seconds(60)});
    } else {
        throw Error(errc::gateway_config, "configure either replay_dir or endpoint");
    }
    return std::make_unique<Gateway>(gateway_config(), std::move(backend));
}

}  // namespace distill
