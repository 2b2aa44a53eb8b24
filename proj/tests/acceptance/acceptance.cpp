// Acceptance checks P1-P9: one PASS/FAIL line each, non-zero exit if any fails.
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "distill/answer_parser.hpp"
#include "distill/dataset_io.hpp"
#include "distill/distiller.hpp"
#include "distill/emitter.hpp"
#include "distill/evaluator.hpp"
#include "distill/human_eval.hpp"
#include "distill/log.hpp"
#include "distill/orchestrator.hpp"
#include "distill/prompt.hpp"
#include "test_support.hpp"

using namespace distill;
using distill::testing::TempDir;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::vector<std::pair<std::string, DatasetKind>> kSets{
    {"csqa", DatasetKind::multi_choice_5}, {"strategyqa", DatasetKind::yes_no}, {"obqa", DatasetKind::multi_choice_4}};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> split_blocks(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto next = text.find("\n\n", pos);
        if (next == std::string::npos) next = text.size();
        out.push_back(text.substr(pos, next - pos));
        pos = next + 2;
    }
    return out;
}

Outcome p1_prompt_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    int matched = 0, total = 0;
    std::string mismatches;
    const std::vector<std::pair<std::string, PromptStyle>> styles{
        {"standard", PromptStyle::standard}, {"cot", PromptStyle::chain_of_thought}, {"rp", PromptStyle::rationalization}};
    for (const auto& [name, kind] : kSets) {
        for (const auto& [style_name, style] : styles) {
            const auto set = name + "_" + style_name;
            const auto demos = load_demos(distill::testing::demo_fixture(set), kind);
            const auto expected = split_blocks(read_file(distill::testing::golden(set)));
            const auto rendered = split_blocks(render_demo_blocks(demos, style) + "\n");
            ++total;
            if (rendered == expected) {
                ++matched;
            } else {
                mismatches += " " + set;
            }
        }
    }
    const double dt = seconds_since(t0);
    std::ostringstream d;
    d << matched << "/" << total << " prompt sets byte-identical to golden text in " << dt << " s" << mismatches;
    return {matched == total && dt < 1.0, d.str()};
}

Outcome p2_parser_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    int ok = 0, total = 0;
    std::string bad;
    for (const auto& [name, kind] : kSets) {
        const auto demos = load_demos(distill::testing::demo_fixture(name + "_cot"), kind);
        const auto blocks = split_blocks(read_file(distill::testing::golden(name + "_cot")));
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            ++total;
            const auto a = blocks[i].rfind("\nA:");
            if (a == std::string::npos || i >= demos.demos.size()) continue;
            const auto completion = blocks[i].substr(a + 3);
            const auto& demo = demos.demos[i];
            const auto r = parse_cot(completion, demo.instance, kind);
            const bool good = r.status == ParseStatus::ok && r.explanation && *r.explanation == demo.explanation &&
                              r.prediction && answers_match(*r.prediction, demo.instance.gold) &&
                              r.prediction->letter == demo.instance.gold.letter;
            if (good) ++ok;
            else bad += " " + demo.instance.id;
        }
    }
    const double dt = seconds_since(t0);
    std::ostringstream d;
    d << ok << "/" << total << " chain-of-thought demos parsed to their (explanation, answer) in " << dt << " s" << bad;
    return {ok == total && total == 21 && dt < 1.0, d.str()};
}

// Brute-force recount straight from the replay records: a chain-of-thought completion counts as correct
// when its text after the last "the answer is " is exactly the rendered gold answer plus ".".
std::size_t oracle_correct(const distill::testing::DistillFixture& f) {
    std::map<std::string, const Instance*> by_question;
    for (const auto& inst : f.dataset.instances) by_question["Q: " + inst.question] = &inst;
    std::size_t correct = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(f.replay_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto rec = json::parse(read_file(entry.path()));
        const auto prompt = rec.at("prompt").get<std::string>();
        if (prompt.size() < 3 || prompt.substr(prompt.size() - 3) != "\nA:") continue;
        const auto q = prompt.rfind("\nQ: ");
        const auto line = prompt.substr(q + 1, prompt.find('\n', q + 1) - q - 1);
        const Instance* inst = by_question.at(line);
        const auto text = rec.at("completion").get<std::string>();
        const auto m = text.rfind("the answer is ");
        if (m == std::string::npos) continue;
        const auto said = text.substr(m + 14);
        if (said == inst->gold.text + " (" + std::string(1, *inst->gold.letter) + ").") ++correct;
    }
    return correct;
}

struct FixtureRun {
    TempDir tmp{"acceptance"};
    distill::testing::DistillFixture fixture = distill::testing::make_distill_fixture(tmp / "replay");
    std::unique_ptr<Gateway> gateway(const std::string& cache) const {
        GatewayConfig cfg;
        cfg.cache_dir = tmp / cache;
        return std::make_unique<Gateway>(cfg, std::make_unique<ReplayBackend>(fixture.replay_dir, fixture.backend_id));
    }
};

Outcome p3_cote_rejection(const FixtureRun& run) {
    auto gw = run.gateway("cache_p3");
    const auto r = annotate_cote(run.fixture.dataset, run.fixture.cot, *gw, {});
    const auto oracle = oracle_correct(run.fixture);
    std::size_t iff_violations = 0;
    for (const auto& a : r.annotated) {
        if (a.has_explanation() != a.llm_correct) ++iff_violations;
    }
    std::ostringstream d;
    d << "accepted_cote=" << r.stats.accepted_cote << " none_count=" << r.stats.none_count << " oracle_correct=" << oracle
      << " explanation<=>correct violations=" << iff_violations;
    return {r.stats.accepted_cote == 120 && r.stats.none_count == 80 && oracle == 120 && iff_violations == 0 &&
                r.stats.total == 200,
            d.str()};
}

Outcome p4_crop_decomposition(const FixtureRun& run) {
    auto gw = run.gateway("cache_p4");
    const auto cote = annotate_cote(run.fixture.dataset, run.fixture.cot, *gw, {});
    const auto crop = annotate_crop(run.fixture.dataset, run.fixture.cot, run.fixture.rp, *gw, {});
    std::size_t differing = 0, correct = 0;
    for (std::size_t i = 0; i < crop.annotated.size(); ++i) {
        if (!cote.annotated[i].llm_correct) continue;
        ++correct;
        if (to_json(crop.annotated[i]).dump() != to_json(cote.annotated[i]).dump()) ++differing;
    }
    std::ostringstream d;
    d << "accepted_cote=" << crop.stats.accepted_cote << " backup_rp=" << crop.stats.backup_rp << " none_count=" << crop.stats.none_count
      << "; " << differing << "/" << correct << " correct instances differ from COTE output";
    return {crop.stats.accepted_cote == 120 && crop.stats.backup_rp == 80 && crop.stats.none_count == 0 && differing == 0 &&
                correct == 120,
            d.str()};
}

Outcome p5_emitter_contract(const FixtureRun& run) {
    auto gw = run.gateway("cache_p5");
    const auto crop = annotate_crop(run.fixture.dataset, run.fixture.cot, run.fixture.rp, *gw, {});
    const auto cote = annotate_cote(run.fixture.dataset, run.fixture.cot, *gw, {});
    const auto kind = run.fixture.dataset.kind;
    std::map<std::string, const AnnotatedInstance*> by_id;
    for (const auto& a : crop.annotated) by_id[a.instance.id] = &a;

    std::size_t cot_ok = 0, cot_total = 0;
    for (const auto& rec : emit(crop.annotated, kind, MtMode::mt_cot).records) {
        if (rec.task != TaskTag::qtr) continue;
        ++cot_total;
        const auto& a = *by_id.at(rec.instance_id);
        const auto ans = extract_answer(rec.target, a.instance, kind);
        if (ans && answers_match(*ans, a.instance.gold) && ans->letter == a.instance.gold.letter) ++cot_ok;
    }
    std::size_t re_ok = 0, re_total = 0;
    for (const auto& rec : emit(crop.annotated, kind, MtMode::mt_re).records) {
        if (rec.task != TaskTag::qtr) continue;
        ++re_total;
        if (rec.target == *by_id.at(rec.instance_id)->explanation) ++re_ok;
    }
    std::map<std::string, bool> is_none;
    std::size_t none_instances = 0;
    for (const auto& a : cote.annotated) {
        is_none[a.instance.id] = a.source == ExplanationSource::none;
        none_instances += is_none[a.instance.id];
    }
    std::size_t none_qtr = 0;
    for (auto mode : {MtMode::mt_re, MtMode::mt_ra, MtMode::mt_cot}) {
        for (const auto& rec : emit(cote.annotated, kind, mode).records) {
            if (rec.task == TaskTag::qtr && is_none.at(rec.instance_id)) ++none_qtr;
        }
    }
    std::ostringstream d;
    d << "mt_cot answer recovered " << cot_ok << "/" << cot_total << "; mt_re verbatim " << re_ok << "/" << re_total << "; qtr records from "
      << none_instances << " none-source instances: " << none_qtr;
    return {cot_total == 200 && cot_ok == cot_total && re_total == 200 && re_ok == re_total && none_instances == 80 && none_qtr == 0,
            d.str()};
}

Outcome p6_grid_search() {
    TempDir tmp{"acceptance-grid"};
    struct Case {
        std::string dataset;
        std::size_t size;
        double peak;  // < 0: flat curve
    };
    const std::vector<Case> cases{{"csqa", 50, 0.1}, {"csqa", 100, 0.2}, {"csqa", 200, 0.3}, {"csqa", 400, 0.6},
                                  {"obqa", 50, 0.1}, {"obqa", 100, 0.1}, {"obqa", 200, 0.2}, {"obqa", 400, 0.2},
                                  {"tie", 0, -1.0}};
    std::string got;
    bool all = true;
    for (const auto& c : cases) {
        json by_alpha = json::object();
        for (double a : default_alpha_grid) by_alpha[format_alpha(a)] = c.peak < 0 ? 0.5 : 0.6 - std::abs(a - c.peak);
        const auto profile = tmp / (c.dataset + "_" + std::to_string(c.size) + ".json");
        distill::testing::write_text(profile, json{{"by_alpha", by_alpha}}.dump());
        CommandTrainer trainer({DISTILL_STUB_TRAINER, "--profile", profile.string()});
        GridSearchSpec spec;
        spec.base.mode = c.dataset == "csqa" ? MtMode::mt_ra : MtMode::mt_cot;
        spec.base.train_path = tmp / "train.jsonl";
        spec.base.dev_path = tmp / "dev.jsonl";
        spec.work_dir = tmp / ("grid_" + c.dataset + "_" + std::to_string(c.size));
        spec.parallelism = 3;
        const auto r = grid_search_alpha(spec, default_alpha_grid, trainer);
        const double want = c.peak < 0 ? 0.1 : c.peak;
        const bool ok = std::abs(r.alpha_star - want) < 1e-12 && r.trainer_calls == 9 && r.failures.empty();
        all = all && ok;
        got += " " + c.dataset + (c.size ? "@" + std::to_string(c.size) : "") + "=" + format_alpha(r.alpha_star) + (ok ? "" : "(want " + format_alpha(want) + ")");
    }
    return {all, "alpha*" + got};
}

Outcome p7_human_eval() {
    const auto dir = distill::testing::source_dir() / "fixtures" / "human_eval";
    auto votes = load_votes_csv(dir / "votes.csv");
    auto key = shuffle_key_from_json(json::parse(read_file(dir / "shuffle_key.json")));
    const auto r = aggregate_preferences(votes, key);
    const auto exact = [](double a, double b) { return std::abs(a - b) < 1e-9; };
    bool ok = r.n_examples == 100 && exact(r.pct_a, 14) && exact(r.pct_tie, 44) && exact(r.pct_b, 42) && exact(r.level_pct[0], 7) &&
              exact(r.level_pct[1], 56) && exact(r.level_pct[2], 37);

    // the brute-force search finds counts hitting the same marginals, and its sheet aggregates to them too
    const auto counts = distill::testing::search_sheet_counts(100, 14, 44, 42, 7, 56, 37);
    bool search_ok = false;
    if (counts) {
        const auto sheet = distill::testing::build_sheet(*counts);
        const auto s = aggregate_preferences(sheet.votes, sheet.key);
        search_ok = exact(s.pct_a, 14) && exact(s.pct_tie, 44) && exact(s.pct_b, 42) && exact(s.level_pct[0], 7) &&
                    exact(s.level_pct[1], 56) && exact(s.level_pct[2], 37);
    }

    const auto swap = [](ShownChoice c) { return c == ShownChoice::a ? ShownChoice::b : c == ShownChoice::b ? ShownChoice::a : c; };
    for (auto& v : votes) v.choice = swap(v.choice);
    const auto votes_only = aggregate_preferences(votes, key);
    for (auto& [id, side] : key) side = swap(side);
    const auto both = aggregate_preferences(votes, key);
    const bool symmetric = exact(votes_only.pct_a, r.pct_b) && exact(votes_only.pct_b, r.pct_a) && votes_only.level_counts == r.level_counts &&
                           exact(both.pct_a, r.pct_a) && exact(both.pct_b, r.pct_b) && both.level_counts == r.level_counts;
    std::ostringstream d;
    d << "preference " << r.pct_a << "/" << r.pct_tie << "/" << r.pct_b << " %, levels " << r.level_pct[0] << "/" << r.level_pct[1] << "/"
      << r.level_pct[2] << " %; search sheet " << (search_ok ? "matches" : "MISSES") << "; side swap " << (symmetric ? "symmetric" : "ASYMMETRIC");
    return {ok && search_ok && symmetric, d.str()};
}

Outcome p8_gateway_idempotence(const FixtureRun& run) {
    GatewayConfig cfg;
    cfg.cache_dir = run.tmp / "cache_p8";
    auto backend = std::make_unique<ReplayBackend>(run.fixture.replay_dir, run.fixture.backend_id);
    auto* replay = backend.get();
    Gateway gw(cfg, std::move(backend));
    const auto first = annotate_crop(run.fixture.dataset, run.fixture.cot, run.fixture.rp, gw, {});
    const auto reads_after_first = replay->reads();
    const auto second = annotate_crop(run.fixture.dataset, run.fixture.cot, run.fixture.rp, gw, {});
    const auto extra = replay->reads() - reads_after_first;
    const bool identical = serialize_annotated(first.annotated) == serialize_annotated(second.annotated) &&
                           to_json(first.stats).dump() == to_json(second.stats).dump();
    std::ostringstream d;
    d << "first run " << reads_after_first << " replay reads, second run " << extra << " extra; outputs "
      << (identical ? "byte-identical" : "DIFFER");
    return {extra == 0 && identical && reads_after_first == 280, d.str()};
}

// Planted per-run values m + s*z with z = (-2,-1,0,1,2)/sqrt(2.5) have mean m and sample std s exactly.
Outcome p9_reported_aggregates() {
    const auto cells = json::parse(read_file(distill::testing::source_dir() / "fixtures" / "reported" / "cells.json"));
    std::vector<double> z;
    for (int k = -2; k <= 2; ++k) z.push_back(k / std::sqrt(2.5));

    ExperimentMatrix matrix;
    matrix.n_runs = 5;
    matrix.base_seed = 0;
    std::map<std::string, std::pair<double, double>> expected;
    std::vector<std::pair<MtMode, GenerationMethod>> arms;
    for (const auto& c : cells.at("multi_run")) {
        // one matrix cell per reported value, keyed through the model tag
        ExperimentCell cell;
        cell.mode = MtMode::mt_cot;
        cell.method = GenerationMethod::cote;
        cell.alpha = 0.5;
        cell.model_tag = c.at("cell").get<std::string>();
        expected[cell.model_tag] = {c.at("mean").get<double>(), c.at("std").get<double>()};
        matrix.cells.push_back(cell);
    }
    std::size_t ok = 0, total = 0;
    double worst = 0.0;
    // aggregate_ledger groups by mode/method, so run each reported cell through its own ledger
    for (const auto& cell : matrix.cells) {
        ExperimentMatrix one = matrix;
        one.cells = {cell};
        const auto [m, s] = expected.at(cell.model_tag);
        FunctionTrainer planted([&, m = m, s = s](const TrainerManifest& man) {
            return TrainMetrics{0.0, (m + s * z.at(man.config.seed)) / 100.0, json::array()};
        });
        const auto report = aggregate_ledger(run_experiment(one, planted));
        ++total;
        if (report.size() != 1) continue;
        const double err = std::max(std::abs(report[0].stat.mean - m), std::abs(report[0].stat.std - s));
        worst = std::max(worst, err);
        if (err <= 0.01) ++ok;
    }
    for (const auto& c : cells.at("mean_only")) {
        const double m = c.at("mean").get<double>();
        const std::vector<double> runs{m};
        ++total;
        const double err = std::abs(aggregate_runs(std::span<const double>(runs)).mean - m);
        worst = std::max(worst, err);
        if (err <= 0.01) ++ok;
    }
    for (const auto& c : cells.at("counts")) {
        const double acc = c.at("accuracy").get<double>();
        const auto n = c.at("total").get<std::size_t>();
        const auto correct = static_cast<std::size_t>(std::llround(acc * n / 100.0));
        const double err = std::abs(100.0 * RunAccuracy::from_counts(correct, n).accuracy - acc);
        ++total;
        worst = std::max(worst, err);
        if (err <= 0.01) ++ok;
    }
    std::ostringstream d;
    d << ok << "/" << total << " reported cells reproduced from planted values (worst abs error " << worst << ")."
      << " Reported accuracies such as 82.47% (CSQA, T5-3B, MT) need 175B-model generations and multi-GPU finetuning;"
      << " they are not reproducible at desk scale and are used only as aggregation targets";
    return {ok == total && total > 0, d.str()};
}

}  // namespace

int main() {
    log::set_min_level(log::Level::error);
    int failures = 0;
    const auto report = [&](const char* id, const char* title, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail << std::endl;
        failures += o.pass ? 0 : 1;
    };

    report("P1", "prompt fidelity", p1_prompt_fidelity);
    report("P2", "parser fidelity", p2_parser_fidelity);
    FixtureRun run;
    report("P3", "COTE rejection invariant", [&] { return p3_cote_rejection(run); });
    report("P4", "CROP decomposition", [&] { return p4_crop_decomposition(run); });
    report("P5", "emitter contract", [&] { return p5_emitter_contract(run); });
    report("P6", "alpha grid search", p6_grid_search);
    report("P7", "human preference aggregation", p7_human_eval);
    report("P8", "gateway idempotence", [&] { return p8_gateway_idempotence(run); });
    report("P9", "reported aggregates / non-reproducibility", p9_reported_aggregates);
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " acceptance criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
