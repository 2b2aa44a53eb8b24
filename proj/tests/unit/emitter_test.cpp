#include <gtest/gtest.h>

#include <random>

#include "distill/dataset_io.hpp"
#include "distill/emitter.hpp"
#include "distill/error.hpp"
#include "test_support.hpp"

using namespace distill;

namespace {

AnnotatedInstance blotter(ExplanationSource source = ExplanationSource::cote) {
    const auto demos = load_demos(distill::testing::demo_fixture("csqa_cot"), DatasetKind::multi_choice_5);
    return {demos.demos[0].instance, demos.demos[0].explanation, source, demos.demos[0].instance.gold, true};
}

// Random annotations over a synthetic dataset: a third each of cote, rp and none, some blank.
std::vector<AnnotatedInstance> random_annotations(std::size_t n, DatasetKind kind, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::vector<AnnotatedInstance> out;
    for (auto& inst : distill::testing::synthetic_dataset(n, kind, "rand").instances) {
        AnnotatedInstance a{inst, std::nullopt, ExplanationSource::none, std::nullopt, false};
        switch (rng() % 4) {
            case 0: a.source = ExplanationSource::cote; a.explanation = "Because " + inst.id + "."; break;
            case 1: a.source = ExplanationSource::rp; a.explanation = "it fits " + inst.id + "."; break;
            case 2: a.source = ExplanationSource::rp; a.explanation = " "; break;
            default: break;
        }
        out.push_back(std::move(a));
    }
    // at least one usable explanation
    out[0].source = ExplanationSource::cote;
    out[0].explanation = "Because first.";
    return out;
}

}  // namespace

TEST(QtrTarget, Modes) {
    const auto b = blotter();
    EXPECT_EQ(qtr_target(*b.explanation, b.instance.gold, DatasetKind::multi_choice_5, MtMode::mt_cot),
              "The answer must be used to absorb extra ink. Blotters are designed to absorb liquids. the answer is blotter (e).");
    EXPECT_EQ(qtr_target(*b.explanation, b.instance.gold, DatasetKind::multi_choice_5, MtMode::mt_re), *b.explanation);
    EXPECT_EQ(qtr_target(*b.explanation, b.instance.gold, DatasetKind::multi_choice_5, MtMode::mt_ra),
              "the answer is blotter (e). The answer must be used to absorb extra ink. Blotters are designed to absorb liquids.");
    EXPECT_EQ(qtr_target("Water is wet.", {'d', "water"}, DatasetKind::multi_choice_4, MtMode::mt_cot),
              "Water is wet. the answer is (d) water.");
    EXPECT_EQ(qtr_target("Hamsters are prey.", {std::nullopt, "yes"}, DatasetKind::yes_no, MtMode::mt_ra),
              "the answer is yes. Hamsters are prey.");
    EXPECT_THROW(qtr_target("x", {'a', "y"}, DatasetKind::multi_choice_5, MtMode::st), Error);
}

TEST(Emit, RecordShapes) {
    const auto r = emit({blotter()}, DatasetKind::multi_choice_5, MtMode::mt_cot);
    ASSERT_EQ(r.records.size(), 2u);
    const auto& qta = r.records[0];
    const auto& qtr = r.records[1];
    EXPECT_EQ(qta.task, TaskTag::qta);
    EXPECT_EQ(qta.input,
              "answer: What do people use to absorb extra ink from a fountain pen? Answer Choices: (a) shirt pocket (b) "
              "calligrapher's hand (c) inkwell (d) desk drawer (e) blotter");
    EXPECT_EQ(qta.target, "blotter (e)");
    EXPECT_EQ(qtr.task, TaskTag::qtr);
    EXPECT_EQ(qtr.input.substr(9), qta.input.substr(8));
    EXPECT_EQ(qtr.input.rfind("explain: ", 0), 0u);
    EXPECT_EQ(to_json(qta).at("task"), "qta");
    EXPECT_EQ(to_json(qtr).at("id"), "csqa-demo-1");
}

TEST(Emit, NoneSourceGetsOnlyQta) {
    auto none = blotter(ExplanationSource::none);
    none.explanation.reset();
    none.instance.id = "other";
    const auto r = emit({blotter(), none}, DatasetKind::multi_choice_5, MtMode::mt_re);
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_EQ(r.records[2].instance_id, "other");
    EXPECT_EQ(r.records[2].task, TaskTag::qta);
    EXPECT_EQ(r.report.masked_none, 1u);
}

TEST(Emit, SingleTaskIgnoresExplanations) {
    auto annotated = random_annotations(50, DatasetKind::multi_choice_4, 1);
    const auto r = emit(annotated, DatasetKind::multi_choice_4, MtMode::st);
    EXPECT_EQ(r.records.size(), 50u);
    EXPECT_EQ(r.report.qtr, 0u);
    for (auto& a : annotated) {
        a.explanation.reset();
        a.source = ExplanationSource::none;
    }
    EXPECT_EQ(emit(annotated, DatasetKind::multi_choice_4, MtMode::st).records.size(), 50u);
}

TEST(Emit, MultiTaskNeedsSomeExplanation) {
    auto annotated = random_annotations(20, DatasetKind::multi_choice_5, 2);
    for (auto& a : annotated) {
        a.explanation.reset();
        a.source = ExplanationSource::none;
    }
    for (auto mode : {MtMode::mt_re, MtMode::mt_ra, MtMode::mt_cot}) {
        try {
            emit(annotated, DatasetKind::multi_choice_5, mode);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), errc::mode_requires_explanations);
        }
    }
}

// Counts, ordering and recoverability over random annotation mixes.
TEST(Emit, Invariants) {
    for (auto kind : {DatasetKind::multi_choice_5, DatasetKind::yes_no, DatasetKind::multi_choice_4}) {
        for (std::uint32_t seed = 0; seed < 10; ++seed) {
            const auto annotated = random_annotations(80, kind, seed);
            for (auto mode : {MtMode::mt_re, MtMode::mt_ra, MtMode::mt_cot}) {
                const auto r = emit(annotated, kind, mode);
                std::size_t with_expl = 0, none = 0, blank = 0;
                for (const auto& a : annotated) {
                    if (a.source == ExplanationSource::none) ++none;
                    else if (a.has_explanation()) ++with_expl;
                    else ++blank;
                }
                EXPECT_EQ(r.report.qta, annotated.size());
                EXPECT_EQ(r.report.qtr, with_expl);
                EXPECT_EQ(r.report.masked_none, none);
                EXPECT_EQ(r.report.skipped_empty, blank);
                EXPECT_EQ(r.records.size(), r.report.qta + r.report.qtr);

                std::size_t ai = 0;
                for (std::size_t k = 0; k < r.records.size(); ++k) {
                    const auto& rec = r.records[k];
                    ASSERT_EQ(rec.task, TaskTag::qta);
                    const auto& a = annotated[ai++];
                    EXPECT_EQ(rec.instance_id, a.instance.id);
                    EXPECT_EQ(rec.input, std::string(qta_prefix) + render_question_input(a.instance, kind));
                    EXPECT_EQ(rec.target, render_answer(a.instance.gold, kind));
                    if (k + 1 < r.records.size() && r.records[k + 1].task == TaskTag::qtr) {
                        const auto& q = r.records[++k];
                        EXPECT_EQ(q.instance_id, a.instance.id);
                        EXPECT_EQ(q.input, std::string(qtr_prefix) + render_question_input(a.instance, kind));
                        // explanation and gold are recoverable from the target
                        EXPECT_NE(q.target.find(*a.explanation), std::string::npos);
                        if (mode != MtMode::mt_re) {
                            EXPECT_NE(q.target.find("the answer is " + render_answer(a.instance.gold, kind)), std::string::npos);
                        } else {
                            EXPECT_EQ(q.target, *a.explanation);
                        }
                    }
                }
                EXPECT_EQ(ai, annotated.size());
            }
        }
    }
}

TEST(Emit, SerializationRoundTrip) {
    distill::testing::TempDir tmp;
    const auto r = emit(random_annotations(30, DatasetKind::multi_choice_5, 9), DatasetKind::multi_choice_5, MtMode::mt_ra);
    distill::testing::write_text(tmp / "train.jsonl", serialize_records(r.records));
    EXPECT_EQ(load_records(tmp / "train.jsonl"), r.records);
}

TEST(EmitQta, EvaluationSplits) {
    const auto ds = distill::testing::synthetic_dataset(7, DatasetKind::yes_no, "dev");
    const auto recs = emit_qta(ds);
    ASSERT_EQ(recs.size(), 7u);
    EXPECT_EQ(recs[0].input, "answer: Synthetic question number 0?");
    EXPECT_EQ(recs[0].target, "yes");
    EXPECT_EQ(recs[1].target, "no");
}

TEST(Modes, Names) {
    for (auto m : {MtMode::st, MtMode::mt_re, MtMode::mt_ra, MtMode::mt_cot}) EXPECT_EQ(mt_mode_from_string(to_string(m)), m);
    EXPECT_THROW(mt_mode_from_string("mt_zz"), Error);
}
