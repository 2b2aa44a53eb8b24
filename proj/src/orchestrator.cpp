#include "distill/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <random>
#include <set>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unordered_map>

#include "distill/dataset_io.hpp"
#include "distill/error.hpp"
#include "distill/log.hpp"

extern char** environ;

namespace distill {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(errc::config_invalid, "alpha must lie in [0, 1], got " + format_alpha(alpha));
    }
    if (mode == MtMode::st && alpha != 1.0) {
        throw Error(errc::config_invalid, "st mode trains qta only and requires alpha = 1");
    }
}

json to_json(const TrainerManifest& m) {
    return {{"train_path", m.config.train_path.string()},
            {"dev_path", m.config.dev_path.string()},
            {"test_path", m.config.test_path.empty() ? json(nullptr) : json(m.config.test_path.string())},
            {"alpha", m.config.alpha},
            {"mode", to_string(m.config.mode)},
            {"seed", m.config.seed},
            {"model_tag", m.config.model_tag},
            {"output_dir", m.output_dir.string()},
            {"metrics_path", m.metrics_path.string()}};
}

TrainerManifest trainer_manifest_from_json(const json& j) {
    TrainerManifest m;
    m.config.train_path = j.at("train_path").get<std::string>();
    m.config.dev_path = j.at("dev_path").get<std::string>();
    if (j.contains("test_path") && !j.at("test_path").is_null()) m.config.test_path = j.at("test_path").get<std::string>();
    m.config.alpha = j.at("alpha").get<double>();
    m.config.mode = mt_mode_from_string(j.at("mode").get<std::string>());
    m.config.seed = j.at("seed").get<std::uint64_t>();
    m.config.model_tag = j.value("model_tag", "");
    m.output_dir = j.at("output_dir").get<std::string>();
    m.metrics_path = j.at("metrics_path").get<std::string>();
    return m;
}

json to_json(const TrainMetrics& m) {
    return {{"dev_accuracy", m.dev_accuracy},
            {"test_accuracy", m.test_accuracy ? json(*m.test_accuracy) : json(nullptr)},
            {"losses", m.losses}};
}

TrainMetrics train_metrics_from_json(const json& j) {
    TrainMetrics m;
    m.dev_accuracy = j.at("dev_accuracy").get<double>();
    if (j.contains("test_accuracy") && !j.at("test_accuracy").is_null()) m.test_accuracy = j.at("test_accuracy").get<double>();
    if (j.contains("losses")) m.losses = j.at("losses");
    return m;
}

CommandTrainer::CommandTrainer(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw Error(errc::config_invalid, "trainer command is empty");
}

TrainMetrics CommandTrainer::train(const TrainerManifest& manifest) {
    std::filesystem::create_directories(manifest.output_dir);
    const auto manifest_path = manifest.output_dir / "manifest.json";
    write_file_atomic(manifest_path, to_json(manifest).dump(2) + "\n");
    std::error_code ec;
    std::filesystem::remove(manifest.metrics_path, ec);

    std::vector<std::string> args = argv_;
    args.push_back(manifest_path.string());
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    cargs.push_back(nullptr);

    const auto stderr_path = (manifest.output_dir / "trainer.stderr").string();
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);

    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, cargs[0], &actions, nullptr, cargs.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    const json where = {{"alpha", manifest.config.alpha}, {"seed", manifest.config.seed}, {"command", argv_}};
    if (rc != 0) {
        auto details = where;
        details["reason"] = std::strerror(rc);
        throw Error(errc::trainer_failure, "cannot start trainer " + argv_[0] + ": " + std::strerror(rc), details);
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw Error(errc::trainer_failure, "waitpid failed", where);
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        auto details = where;
        details["exit_status"] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        details["stderr_path"] = stderr_path;
        throw Error(errc::trainer_failure, "trainer exited abnormally (alpha " + format_alpha(manifest.config.alpha) + ")", details);
    }
    try {
        return train_metrics_from_json(json::parse(read_file(manifest.metrics_path)));
    } catch (const std::exception& e) {
        auto details = where;
        details["reason"] = e.what();
        throw Error(errc::trainer_failure, std::string("trainer produced no readable metrics: ") + e.what(), details);
    }
}

std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> out;
    std::string cur;
    bool in_token = false;
    char quote = 0;
    for (char c : command) {
        if (quote) {
            if (c == quote) {
                quote = 0;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
            in_token = true;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            if (in_token) out.push_back(std::move(cur));
            cur.clear();
            in_token = false;
        } else {
            cur.push_back(c);
            in_token = true;
        }
    }
    if (quote) throw Error(errc::config_invalid, "unterminated quote in command: " + command);
    if (in_token) out.push_back(std::move(cur));
    return out;
}

std::string format_alpha(double alpha) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, alpha);
    return std::string(buf, end);
}

namespace {

double parse_double(std::string s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw Error(errc::config_invalid, "not a number: \"" + s + "\"");
    }
    return v;
}

// Runs fn(0..n-1) on up to `parallelism` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t parallelism, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::jthread> pool;
    const auto threads = std::min(std::max<std::size_t>(1, parallelism), std::max<std::size_t>(1, n));
    for (std::size_t t = 0; t + 1 < threads; ++t) pool.emplace_back(worker);
    worker();
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Unbiased draw in [0, bound) from the raw engine output; std distributions are not portable.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t r = rng();
        if (r < limit) return r % bound;
    }
}

}  // namespace

std::vector<double> parse_alpha_grid(const std::string& spec) {
    std::vector<double> grid;
    if (const auto dots = spec.find(".."); dots != std::string::npos) {
        const auto colon = spec.find(':', dots);
        const double lo = parse_double(spec.substr(0, dots));
        const double hi = parse_double(spec.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2));
        const double step = colon == std::string::npos ? 0.1 : parse_double(spec.substr(colon + 1));
        if (step <= 0.0 || hi < lo) throw Error(errc::config_invalid, "bad alpha range: " + spec);
        const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long k = 0; k <= n; ++k) {
            // Round to 10 decimals so 0.1 + 2*0.1 lands on 0.3 exactly as typed.
            grid.push_back(std::round((lo + static_cast<double>(k) * step) * 1e10) / 1e10);
        }
    } else {
        std::size_t start = 0;
        while (start <= spec.size()) {
            const auto comma = spec.find(',', start);
            grid.push_back(parse_double(spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    if (grid.empty()) throw Error(errc::config_invalid, "alpha grid is empty");
    return grid;
}

json to_json(const GridResult& r) {
    json per = json::object();
    for (const auto& [a, acc] : r.per_alpha) per[format_alpha(a)] = acc;
    json failures = json::array();
    for (const auto& f : r.failures) failures.push_back({{"alpha", f.alpha}, {"message", f.message}});
    return {{"per_alpha", per}, {"alpha_star", r.alpha_star}, {"runs_per_alpha", r.runs_per_alpha},
            {"trainer_calls", r.trainer_calls}, {"failures", failures}};
}

double select_alpha_star(const std::map<double, double>& per_alpha) {
    if (per_alpha.empty()) throw Error(errc::trainer_failure, "no grid point produced metrics");
    auto best = per_alpha.begin();
    for (auto it = per_alpha.begin(); it != per_alpha.end(); ++it) {
        if (it->second > best->second) best = it;  // ascending keys: strict > keeps the smallest on ties
    }
    return best->first;
}

GridResult grid_search_alpha(const GridSearchSpec& spec, const std::vector<double>& grid, Trainer& trainer) {
    if (grid.empty()) throw Error(errc::config_invalid, "alpha grid is empty");
    for (double a : grid) {
        if (!(a > 0.0 && a <= 1.0)) throw Error(errc::config_invalid, "grid values must lie in (0, 1], got " + format_alpha(a));
    }
    if (spec.base.mode == MtMode::st) throw Error(errc::config_invalid, "grid search over alpha needs a multi-task mode");

    struct Outcome {
        std::optional<double> accuracy;
        bool called = false;
        std::string error;
    };
    std::vector<Outcome> outcomes(grid.size());
    parallel_for(grid.size(), spec.parallelism, [&](std::size_t i) {
        TrainerManifest m;
        m.config = spec.base;
        m.config.alpha = grid[i];
        m.output_dir = spec.work_dir / ("alpha_" + format_alpha(grid[i]));
        m.metrics_path = m.output_dir / "metrics.json";
        std::error_code ec;
        if (std::filesystem::exists(m.metrics_path, ec)) {
            try {
                outcomes[i].accuracy = train_metrics_from_json(json::parse(read_file(m.metrics_path))).dev_accuracy;
                return;
            } catch (const std::exception&) {
                log::warn("stale metrics at " + m.metrics_path.string() + "; retraining");
            }
        }
        outcomes[i].called = true;
        try {
            m.config.validate();
            auto metrics = trainer.train(m);
            write_file_atomic(m.metrics_path, to_json(metrics).dump(2) + "\n");
            outcomes[i].accuracy = metrics.dev_accuracy;
        } catch (const std::exception& e) {
            outcomes[i].error = e.what();
            log::warn("grid point alpha=" + format_alpha(grid[i]) + " failed: " + e.what());
        }
    });

    GridResult r;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (outcomes[i].called) ++r.trainer_calls;
        if (outcomes[i].accuracy) {
            r.per_alpha[grid[i]] = *outcomes[i].accuracy;
        } else {
            r.failures.push_back({grid[i], outcomes[i].error});
        }
    }
    r.alpha_star = select_alpha_star(r.per_alpha);
    return r;
}

json to_json(const std::vector<FewshotSplit>& splits) {
    json out = json::array();
    for (const auto& s : splits) out.push_back({{"size", s.size}, {"split_index", s.split_index}, {"ids", s.ids}});
    return out;
}

std::vector<FewshotSplit> fewshot_splits_from_json(const json& j) {
    std::vector<FewshotSplit> out;
    for (const auto& s : j) {
        out.push_back({s.at("size").get<std::size_t>(), s.at("split_index").get<std::size_t>(),
                       s.at("ids").get<std::vector<std::string>>()});
    }
    return out;
}

std::vector<FewshotSplit> sample_fewshot_splits(const Dataset& dataset, const std::vector<std::size_t>& sizes,
                                                std::size_t n_splits, std::uint64_t seed) {
    const std::size_t n = dataset.size();
    for (auto size : sizes) {
        if (size > n) {
            throw Error(errc::size_exceeds_dataset,
                        "split size " + std::to_string(size) + " exceeds dataset size " + std::to_string(n),
                        {{"size", size}, {"dataset_size", n}});
        }
    }
    std::vector<FewshotSplit> out;
    std::vector<std::size_t> perm(n);
    for (auto size : sizes) {
        for (std::size_t split = 0; split < n_splits; ++split) {
            std::mt19937_64 rng(splitmix64(seed ^ splitmix64(size * 1000003ULL + split)));
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            // Partial Fisher-Yates: the first `size` slots are a uniform sample without replacement.
            for (std::size_t i = 0; i < size; ++i) {
                const auto j = i + static_cast<std::size_t>(bounded(rng, n - i));
                std::swap(perm[i], perm[j]);
            }
            std::vector<std::size_t> chosen(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(size));
            std::sort(chosen.begin(), chosen.end());
            FewshotSplit s{size, split, {}};
            s.ids.reserve(size);
            for (auto idx : chosen) s.ids.push_back(dataset.instances[idx].id);
            out.push_back(std::move(s));
        }
    }
    return out;
}

Dataset subset(const Dataset& dataset, const FewshotSplit& split) {
    std::unordered_map<std::string, const Instance*> by_id;
    for (const auto& inst : dataset.instances) by_id.emplace(inst.id, &inst);
    Dataset out{dataset.kind, {}};
    for (const auto& id : split.ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(errc::invalid_argument, "split references unknown id " + id);
        out.instances.push_back(*it->second);
    }
    return out;
}

std::string ExperimentCell::key() const { return std::string(to_string(mode)) + "/" + std::string(to_string(method)); }

ExperimentMatrix experiment_matrix_from_json(const json& j) {
    ExperimentMatrix m;
    m.n_runs = j.value("n_runs", std::size_t{5});
    m.base_seed = j.value("base_seed", std::uint64_t{0});
    m.parallelism = j.value("parallelism", std::size_t{1});
    if (j.contains("work_dir")) m.work_dir = j.at("work_dir").get<std::string>();
    if (j.contains("ledger_path")) m.ledger_path = j.at("ledger_path").get<std::string>();
    for (const auto& c : j.at("cells")) {
        ExperimentCell cell;
        cell.mode = mt_mode_from_string(c.at("mode").get<std::string>());
        cell.method = generation_method_from_string(c.value("method", "cote"));
        cell.alpha = c.value("alpha", 1.0);
        cell.model_tag = c.value("model_tag", "t5-base");
        cell.train_path = c.at("train_path").get<std::string>();
        cell.dev_path = c.at("dev_path").get<std::string>();
        if (c.contains("test_path") && !c.at("test_path").is_null()) cell.test_path = c.at("test_path").get<std::string>();
        m.cells.push_back(std::move(cell));
    }
    return m;
}

bool MetricsLedger::complete() const {
    return std::all_of(entries.begin(), entries.end(), [](const LedgerEntry& e) { return e.complete; });
}

json to_json(const MetricsLedger& l) {
    json entries = json::array();
    for (const auto& e : l.entries) {
        entries.push_back({{"cell", e.cell},
                           {"mode", to_string(e.mode)},
                           {"method", to_string(e.method)},
                           {"run_index", e.run_index},
                           {"seed", e.seed},
                           {"status", e.complete ? "complete" : "failed"},
                           {"dev_accuracy", e.dev_accuracy},
                           {"test_accuracy", e.test_accuracy ? json(*e.test_accuracy) : json(nullptr)},
                           {"error", e.error}});
    }
    return {{"entries", entries}, {"complete", l.complete()}};
}

MetricsLedger metrics_ledger_from_json(const json& j) {
    MetricsLedger l;
    for (const auto& e : j.at("entries")) {
        LedgerEntry le;
        le.cell = e.at("cell").get<std::string>();
        le.mode = mt_mode_from_string(e.at("mode").get<std::string>());
        le.method = generation_method_from_string(e.at("method").get<std::string>());
        le.run_index = e.at("run_index").get<std::size_t>();
        le.seed = e.at("seed").get<std::uint64_t>();
        le.complete = e.at("status") == "complete";
        le.dev_accuracy = e.value("dev_accuracy", 0.0);
        if (e.contains("test_accuracy") && !e.at("test_accuracy").is_null()) le.test_accuracy = e.at("test_accuracy").get<double>();
        le.error = e.value("error", "");
        l.entries.push_back(std::move(le));
    }
    return l;
}

MetricsLedger run_experiment(const ExperimentMatrix& matrix, Trainer& trainer) {
    std::map<std::pair<std::string, std::size_t>, LedgerEntry> previous;
    std::error_code ec;
    if (!matrix.ledger_path.empty() && std::filesystem::exists(matrix.ledger_path, ec)) {
        for (auto& e : metrics_ledger_from_json(json::parse(read_file(matrix.ledger_path))).entries) {
            previous[{e.cell, e.run_index}] = std::move(e);
        }
    }

    MetricsLedger ledger;
    std::vector<std::pair<std::size_t, const ExperimentCell*>> pending;  // ledger index, cell
    for (const auto& cell : matrix.cells) {
        for (std::size_t run = 0; run < matrix.n_runs; ++run) {
            const auto seed = matrix.base_seed + run;
            auto it = previous.find({cell.key(), run});
            if (it != previous.end() && it->second.complete && it->second.seed == seed) {
                ledger.entries.push_back(it->second);
                continue;
            }
            ledger.entries.push_back({cell.key(), cell.mode, cell.method, run, seed, false, 0.0, std::nullopt, "pending"});
            pending.emplace_back(ledger.entries.size() - 1, &cell);
        }
    }

    std::mutex ledger_mutex;
    auto persist = [&] {
        if (!matrix.ledger_path.empty()) write_file_atomic(matrix.ledger_path, to_json(ledger).dump(2) + "\n");
    };
    {
        std::lock_guard lock(ledger_mutex);
        persist();
    }
    parallel_for(pending.size(), matrix.parallelism, [&](std::size_t k) {
        const auto [index, cell] = pending[k];
        LedgerEntry entry;
        {
            std::lock_guard lock(ledger_mutex);
            entry = ledger.entries[index];
        }
        TrainerManifest m;
        m.config = {cell->alpha, cell->mode, entry.seed, cell->model_tag, cell->train_path, cell->dev_path, cell->test_path};
        m.output_dir = matrix.work_dir / (std::string(to_string(cell->mode)) + "_" + std::string(to_string(cell->method))) /
                       ("run_" + std::to_string(entry.run_index));
        m.metrics_path = m.output_dir / "metrics.json";
        try {
            m.config.validate();
            const auto metrics = trainer.train(m);
            entry.complete = true;
            entry.dev_accuracy = metrics.dev_accuracy;
            entry.test_accuracy = metrics.test_accuracy;
            entry.error.clear();
        } catch (const std::exception& e) {
            entry.complete = false;
            entry.error = e.what();
            log::warn("run " + entry.cell + "#" + std::to_string(entry.run_index) + " failed: " + e.what());
        }
        std::lock_guard lock(ledger_mutex);
        ++ledger.trainer_calls;
        ledger.entries[index] = std::move(entry);
        persist();
    });
    return ledger;
}

std::vector<CellReport> aggregate_ledger(const MetricsLedger& ledger) {
    std::vector<CellReport> out;
    std::map<std::string, std::vector<double>> values;
    for (const auto& e : ledger.entries) {
        if (!e.complete) continue;
        if (!values.contains(e.cell)) out.push_back({e.cell, e.mode, e.method, {}});
        values[e.cell].push_back(100.0 * e.test_accuracy.value_or(e.dev_accuracy));
    }
    for (auto& r : out) r.stat = aggregate_runs(std::span<const double>(values[r.cell]));
    return out;
}

json to_json(const std::vector<CellReport>& report) {
    json cells = json::array();
    for (const auto& r : report) {
        cells.push_back({{"cell", r.cell}, {"mode", to_string(r.mode)}, {"method", to_string(r.method)},
                         {"mean", r.stat.mean}, {"std", r.stat.std}, {"n_runs", r.stat.n_runs}});
    }
    return {{"cells", cells}};
}

}  // namespace distill
