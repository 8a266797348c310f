// Acceptance gate: one line per criterion, exit 0 only when every criterion
// passes. Usage: acceptance <path-to-ecgformer-cli>. Tolerances are pinned
// here, next to the checks that use them.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ecgformer/config.hpp"
#include "ecgformer/dataset.hpp"
#include "ecgformer/export.hpp"
#include "ecgformer/gradsuite.hpp"
#include "ecgformer/head.hpp"
#include "ecgformer/metrics.hpp"
#include "ecgformer/model.hpp"
#include "ecgformer/rng.hpp"
#include "ecgformer/synth.hpp"
#include "ecgformer/train.hpp"
#include "ecgformer/transformer.hpp"
#include "oracles.hpp"

using namespace ecgformer;
namespace fs = std::filesystem;
using Td = Tensor<double>;

namespace {

fs::path g_scratch;
std::string g_cli;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string fmt1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string scratch_dir(const std::string& name) {
    const fs::path p = g_scratch / name;
    fs::create_directories(p);
    return p.string();
}

struct Result {
    bool pass = false;
    std::string detail;
};

ClassMorphology peaked_t() {
    ClassMorphology m;
    m.name = "peaked-t";
    m.amp_mult[4] = 2.0;
    m.width_mult[4] = 0.6;
    return m;
}

DatasetManifest write_dataset(const SyntheticSpec& spec, const std::string& dir) {
    DatasetManifest m;
    for (const auto& c : spec.classes) m.class_names.push_back(c.name);
    for (const Recording& rec : synth_generate(spec)) {
        save_recording(rec, dir + "/" + rec.id + ".json");
        m.entries.push_back({rec.id + ".json", rec.labels, -1});
    }
    return m;
}

// ---------------------------------------------------------------------------
// 1. Gradient suite.

Result criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const GradSuiteResult res = run_gradient_suite(7, 50);
    double worst_prim = 0, worst_model = 0;
    size_t prims = 0, models = 0;
    for (const auto& e : res.entries) {
        if (e.name.rfind("model_", 0) == 0) {
            worst_model = std::max(worst_model, e.max_rel_err);
            ++models;
        } else {
            worst_prim = std::max(worst_prim, e.max_rel_err);
            ++prims;
        }
    }
    const double wall = seconds_since(t0);
    const bool pass = res.all_pass() && prims == 21 && models == 4 && wall < 120.0;
    return {pass, std::to_string(prims) + " primitive + " + std::to_string(models) +
                      " end-to-end checks, 50 instances each; worst rel err " +
                      fmt3(worst_prim) + " (tol 1e-5) and " + fmt3(worst_model) +
                      " (tol 1e-4); " + fmt1(wall) + "s"};
}

// ---------------------------------------------------------------------------
// 2. Metric oracle equivalence.

Result criterion_metrics() {
    bool hand = true;
    hand = hand && fbeta({2, 1, 1, 5}) == 10.0 / 15.0;
    hand = hand && gbeta({2, 1, 1, 5}) == 2.0 / 5.0;
    const auto conf = challenge_confusion({{0}}, {{0, 1}}, 2);
    hand = hand && conf[0] == 0.5 && conf[2] == 0.5 && conf[1] == 0 && conf[3] == 0;
    const std::vector<double> eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
    const auto perfect = challenge_score({{0}, {1}, {2}}, {{0}, {1}, {2}}, eye, 3);
    hand = hand && perfect.raw == 3.0 && perfect.normalized == 1.0;
    const auto wrong = challenge_score({{0}, {1}, {2}}, {{1}, {2}, {0}}, eye, 3);
    hand = hand && wrong.raw == 0.0 && wrong.normalized == 0.0;
    hand = hand && macro_auc({0.8, 0.3, 0.5, 0.1}, {{0}, {0}, {}, {}}, 1) == 0.75;

    double worst = 0;
    for (size_t inst = 0; inst < 100; ++inst) {
        std::mt19937 rng = derive_rng(211, "accept-metrics", inst);
        const size_t n = 1 + rng_index(rng, 5);
        const size_t R = 1 + rng_index(rng, 30);
        std::vector<std::vector<int>> truth(R), pred(R);
        std::vector<double> scores(R * n), w(n * n);
        for (size_t r = 0; r < R; ++r)
            for (size_t c = 0; c < n; ++c) {
                if (rng_uniform(rng, 0, 1) < 0.3) truth[r].push_back((int)c);
                if (rng_uniform(rng, 0, 1) < 0.3) pred[r].push_back((int)c);
                scores[r * n + c] = rng_uniform(rng, 0, 1);
            }
        for (auto& v : w) v = rng_uniform(rng, 0, 1);

        const auto got = per_class_counts(truth, pred, n);
        const auto want = oracle::counts(truth, pred, n);
        for (size_t c = 0; c < n; ++c) {
            worst = std::max({worst, std::abs(got[c].tp - want[c].tp),
                              std::abs(got[c].fp - want[c].fp),
                              std::abs(got[c].fn - want[c].fn),
                              std::abs(got[c].tn - want[c].tn)});
            worst = std::max(worst,
                             std::abs(fbeta(got[c]) - oracle::fbeta(want[c], 2)));
            worst = std::max(worst,
                             std::abs(gbeta(got[c]) - oracle::gbeta(want[c], 2)));
        }
        const auto a = challenge_confusion(truth, pred, n);
        const auto a0 = oracle::confusion(truth, pred, n);
        for (size_t k = 0; k < n * n; ++k)
            worst = std::max(worst, std::abs(a[k] - a0[k]));
        const auto s = challenge_score(truth, pred, w, n);
        worst = std::max(worst, std::abs(s.raw - oracle::raw_score(truth, pred, w, n)));
        worst = std::max(
            worst, std::abs(s.normalized - oracle::normalized_score(truth, pred, w, n)));
        worst = std::max(worst, std::abs(macro_auc(scores, truth, n) -
                                         oracle::macro_auc(scores, truth, n)));
    }
    const bool pass = hand && worst < 1e-9;
    return {pass, std::string("hand examples ") + (hand ? "exact" : "WRONG") +
                      "; 100 random instances vs brute force, worst abs diff " +
                      fmt3(worst) + " (tol 1e-9)"};
}

// ---------------------------------------------------------------------------
// 3. Attention invariants.

Result criterion_attention() {
    StageConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.layers = {1, 1, 1};
    cfg.mlp_ratio = 2;

    std::mt19937 rng = derive_rng(223, "accept-attn");
    const Td x = Td::randn({4, 6, 8}, rng);

    auto std_params = TransformerParams<double>::init(cfg, 1, {6, 4, 2}, rng);
    AttnMap m1;
    msa_standard(x, std_params.stages[0].layers[0], cfg, &m1);
    double dev_std = 0;
    for (size_t row = 0; row < 4 * 2 * 6; ++row) {
        double s = 0;
        for (size_t j = 0; j < 6; ++j) s += m1.values[row * 6 + j];
        dev_std = std::max(dev_std, std::abs(s - 1.0));
    }

    StageConfig dcfg = cfg;
    dcfg.attn = AttnKind::kDifferential;
    dcfg.lambda_init = 0.37;
    auto diff_params = TransformerParams<double>::init(dcfg, 1, {6, 4, 2}, rng);
    AttnMap m2;
    msa_differential(x, diff_params.stages[0].layers[0], dcfg, &m2);
    double dev_diff = 0;
    for (size_t row = 0; row < 4 * 2 * 6; ++row) {
        double s = 0;
        for (size_t j = 0; j < 6; ++j) s += m2.values[row * 6 + j];
        dev_diff = std::max(dev_diff, std::abs(s - (1.0 - 0.37)));
    }

    // lambda = 0 equivalence against standard attention with tied weights:
    // scale Q's first-half columns by sqrt(2), zero both second halves.
    StageConfig zcfg = dcfg;
    zcfg.lambda_init = 0.0;
    auto zp = TransformerParams<double>::init(zcfg, 1, {6, 4, 2}, rng);
    const LayerParams<double>& dp = zp.stages[0].layers[0];
    auto sp2 = TransformerParams<double>::init(cfg, 1, {6, 4, 2}, rng);
    LayerParams<double>& sp = sp2.stages[0].layers[0];
    const size_t D = 8, H = 2, dh = D / H, half = dh / 2;
    sp.wv = dp.wv;
    sp.bv = dp.bv;
    sp.wo = dp.wo;
    sp.bo = dp.bo;
    for (size_t h = 0; h < H; ++h)
        for (size_t j = 0; j < dh; ++j) {
            const size_t col = h * dh + j;
            for (size_t r = 0; r < D; ++r) {
                sp.wq.values()[r * D + col] =
                    j < half ? std::sqrt(2.0) * dp.wq.values()[r * D + col] : 0.0;
                sp.wk.values()[r * D + col] =
                    j < half ? dp.wk.values()[r * D + col] : 0.0;
            }
            sp.bq.values()[col] = j < half ? std::sqrt(2.0) * dp.bq.values()[col] : 0.0;
            sp.bk.values()[col] = j < half ? dp.bk.values()[col] : 0.0;
        }
    const Td y_diff = msa_differential(x, dp, zcfg);
    const Td y_std = msa_standard(x, sp, cfg);
    double tied = 0;
    for (size_t i = 0; i < y_diff.numel(); ++i)
        tied = std::max(tied, std::abs(y_diff.values()[i] - y_std.values()[i]));

    const bool pass = dev_std < 1e-6 && dev_diff < 1e-6 && tied < 1e-6;
    return {pass, "row sums: standard off by " + fmt3(dev_std) +
                      ", differential off by " + fmt3(dev_diff) +
                      " from 1-lambda; lambda=0 vs tied standard max abs " +
                      fmt3(tied) + " (all tol 1e-6)"};
}

// ---------------------------------------------------------------------------
// 4. Lead isolation and permutation behavior through the full model.

Result criterion_lead_isolation() {
    ModelConfig cfg;
    cfg.enc.leads = 4;
    cfg.enc.kernels = {5, 3, 3, 3};
    cfg.enc.strides = {2, 2, 1, 1};
    cfg.enc.multipliers = {2, 4, 8, 8};
    cfg.stage.dim = 8;
    cfg.stage.heads = 2;
    cfg.stage.layers = {1, 1, 1};
    cfg.stage.mlp_ratio = 2;
    cfg.n_classes = 3;
    cfg.input_len = 40;
    cfg.validate();

    std::mt19937 rng = derive_rng(227, "accept-iso");
    const auto params = ModelParams<double>::init(cfg, rng);
    const size_t B = 2, C = 4, D = 8;
    const Td x = Td::randn({B, C, 40}, rng, 0.5);

    auto final_cls = [&](const Td& input) {
        auto taps = encode(input, cfg.enc, params.enc);
        std::array<ContextualTokens<double>, kStages> proj;
        for (size_t s = 0; s < kStages; ++s)
            proj[s] = project_per_lead(taps[s], cfg.enc, params.enc, D);
        return run_three_stages(proj, params.tf, cfg.stage);
    };

    const Td base = final_cls(x);
    Td bumped = Td::from(x.shape(), x.values());
    for (size_t b = 0; b < B; ++b)
        for (size_t t = 0; t < 40; ++t) bumped.values()[(b * C + 2) * 40 + t] += 0.25;
    const Td shifted = final_cls(bumped);
    bool isolated = true, perturbed_changed = false;
    for (size_t b = 0; b < B; ++b)
        for (size_t c = 0; c < C; ++c)
            for (size_t d = 0; d < D; ++d) {
                const bool same = base.values()[(b * C + c) * D + d] ==
                                  shifted.values()[(b * C + c) * D + d];
                if (c == 2 && !same) perturbed_changed = true;
                if (c != 2) isolated = isolated && same;
            }

    const std::array<size_t, 4> perm{3, 0, 2, 1};
    Td px = Td::zeros(x.shape());
    for (size_t b = 0; b < B; ++b)
        for (size_t c = 0; c < C; ++c)
            for (size_t t = 0; t < 40; ++t)
                px.values()[(b * C + c) * 40 + t] = x.values()[(b * C + perm[c]) * 40 + t];
    const Td permuted = final_cls(px);
    bool rows_permute = true;
    for (size_t b = 0; b < B; ++b)
        for (size_t c = 0; c < C; ++c)
            for (size_t d = 0; d < D; ++d)
                rows_permute = rows_permute &&
                               permuted.values()[(b * C + c) * D + d] ==
                                   base.values()[(b * C + perm[c]) * D + d];

    // Gated logits: permutation invariant up to float reassociation in the
    // softmax-over-leads reductions, asserted at 1e-12 in double.
    const Td logits_base = model_forward(cfg, params, x).logits;
    const Td logits_perm = model_forward(cfg, params, px).logits;
    double logit_dev = 0;
    for (size_t i = 0; i < logits_base.numel(); ++i)
        logit_dev = std::max(logit_dev, std::abs(logits_base.values()[i] -
                                                 logits_perm.values()[i]));

    const bool pass = isolated && perturbed_changed && rows_permute &&
                      logit_dev <= 1e-12;
    return {pass, std::string("untouched leads bit-identical: ") +
                      (isolated ? "yes" : "NO") + "; CLS rows permute bitwise: " +
                      (rows_permute ? "yes" : "NO") +
                      "; gated logits max abs shift " + fmt3(logit_dev) +
                      " (tol 1e-12)"};
}

// ---------------------------------------------------------------------------
// 5. CLS propagation across stage boundaries.

Result criterion_cls_boundary() {
    std::mt19937 rng = derive_rng(229, "accept-cls");
    const std::array<std::array<size_t, 3>, 4> layouts{
        {{1, 1, 1}, {2, 1, 1}, {0, 2, 1}, {1, 0, 3}}};
    bool single = true;
    for (const auto& layout : layouts) {
        StageConfig cfg;
        cfg.dim = 8;
        cfg.heads = 2;
        cfg.layers = layout;
        cfg.mlp_ratio = 2;
        const auto params = TransformerParams<double>::init(cfg, 2, {6, 4, 2}, rng);
        const std::array<size_t, 3> ns{6, 4, 2};
        for (size_t s = 0; s < kStages; ++s) {
            ContextualTokens<double> ctx;
            ctx.tokens = Td::randn({4, ns[s], 8}, rng);
            ctx.batch = 2;
            ctx.leads = 2;
            ctx.spatial = ns[s];
            ctx.width = 8;
            ctx.stage = s;
            const auto out = transformer_stage(ctx, Td::randn({4, 1, 8}, rng),
                                               params.stages[s], cfg, s);
            single = single && out.cls_out.rank() == 3 && out.cls_out.dim(1) == 1;
        }
    }

    bool rejects = false;
    try {
        StageConfig cfg;
        cfg.dim = 8;
        cfg.heads = 2;
        cfg.layers = {1, 1, 1};
        cfg.mlp_ratio = 2;
        const auto params = TransformerParams<double>::init(cfg, 2, {6, 4, 2}, rng);
        ContextualTokens<double> ctx;
        ctx.tokens = Td::randn({4, 6, 8}, rng);
        ctx.batch = 2;
        ctx.leads = 2;
        ctx.spatial = 6;
        ctx.width = 8;
        ctx.stage = 0;
        transformer_stage(ctx, Td::randn({4, 2, 8}, rng), params.stages[0], cfg, 0);
    } catch (const ShapeError&) {
        rejects = true;
    }

    const bool pass = single && rejects;
    return {pass, std::string("boundary token count is 1 across 4 layer layouts x "
                              "3 stages: ") +
                      (single ? "yes" : "NO") +
                      "; a 2-token CLS input is rejected: " +
                      (rejects ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// 6. Overfit check.

TrainConfig overfit_config() {
    TrainConfig cfg;
    cfg.model.enc.leads = 4;
    cfg.model.enc.multipliers = {8, 16, 32, 32};
    cfg.model.stage.dim = 32;
    cfg.model.stage.heads = 4;
    cfg.model.stage.layers = {1, 1, 1};
    cfg.model.n_classes = 2;
    cfg.model.input_len = 256;
    cfg.pipe.target_fs = 100;
    cfg.pipe.segment_seconds = 2.56;
    cfg.batch_size = 16;
    cfg.epochs = 200;
    cfg.seed = 1;
    cfg.optim.lr = 3e-3;
    cfg.stop_loss = 0.05;
    return cfg;
}

Result criterion_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec spec;
    spec.n_recordings = 64;
    spec.leads = 4;
    spec.duration_s = 3.0;
    spec.fs = 250;
    spec.noise_std = 0.05;
    spec.classes = {ClassMorphology{}, peaked_t()};
    spec.seed = 11;
    const std::string data = scratch_dir("overfit/data");
    const DatasetManifest manifest = write_dataset(spec, data);

    const TrainResult res =
        train(overfit_config(), manifest, data, scratch_dir("overfit/run"));
    const double wall = seconds_since(t0);
    const bool pass = res.final_loss < 0.05 && res.epochs_run <= 200 && wall < 300.0;
    return {pass, "train loss " + fmt3(res.final_loss) + " (target < 0.05) after " +
                      std::to_string(res.epochs_run) + " epochs; " + fmt1(wall) +
                      "s (limit 300)"};
}

// ---------------------------------------------------------------------------
// 7. Desk-scale learning signal for the four model variants.

Result criterion_learning() {
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec spec;
    spec.n_recordings = 1200;
    spec.leads = 4;
    spec.duration_s = 6.0;
    spec.fs = 250;
    spec.noise_std = 0.05;
    spec.classes = {ClassMorphology{}, peaked_t()};
    spec.seed = 17;
    const std::string data = scratch_dir("learning/data");
    DatasetManifest manifest = write_dataset(spec, data);
    manifest = split_folds(manifest, 6, 3);

    TrainConfig base;
    base.model.enc.leads = 4;
    base.model.enc.multipliers = {4, 8, 16, 16};
    base.model.stage.dim = 16;
    base.model.stage.heads = 2;
    base.model.stage.layers = {1, 1, 1};
    base.model.n_classes = 2;
    base.model.input_len = 256;
    base.pipe.target_fs = 100;
    base.pipe.segment_seconds = 2.56;
    base.batch_size = 32;
    base.epochs = 10;
    base.seed = 2;
    base.optim.lr = 3e-3;
    base.val_fold = 0;

    struct Variant {
        const char* name;
        HeadKind head;
        AttnKind attn;
        double auc = 0;
    };
    std::array<Variant, 4> variants{{{"base", HeadKind::kPooled, AttnKind::kStandard},
                                     {"gated", HeadKind::kGated, AttnKind::kStandard},
                                     {"diff", HeadKind::kPooled, AttnKind::kDifferential},
                                     {"gated+diff", HeadKind::kGated, AttnKind::kDifferential}}};
    for (auto& v : variants) {
        TrainConfig cfg = base;
        cfg.model.head = v.head;
        cfg.model.stage.attn = v.attn;
        const TrainResult res = train(cfg, manifest, data,
                                      scratch_dir(std::string("learning/") + v.name));
        v.auc = evaluate(res.checkpoint_path, manifest, data, 0, nullptr, nullptr).auc;
    }
    const double wall = seconds_since(t0);

    bool pass = true;
    std::string detail = "test AUC";
    for (const auto& v : variants) {
        pass = pass && v.auc >= 0.90;
        detail += std::string(" ") + v.name + " " + fmt3(v.auc);
    }
    for (size_t i = 1; i < variants.size(); ++i)
        pass = pass && variants[i].auc >= variants[0].auc - 0.05;
    detail += " (floor 0.90, others within 0.05 of base); " + fmt1(wall) + "s";
    return {pass, detail};
}

// ---------------------------------------------------------------------------
// 8. Determinism and round-trips.

Result criterion_determinism() {
    SyntheticSpec spec;
    spec.n_recordings = 8;
    spec.leads = 2;
    spec.duration_s = 2.5;
    spec.fs = 100;
    spec.noise_std = 0.02;
    spec.classes = {ClassMorphology{}, peaked_t()};
    spec.seed = 9;
    const std::string data = scratch_dir("determinism/data");
    const DatasetManifest manifest = write_dataset(spec, data);

    TrainConfig cfg;
    cfg.model.enc.leads = 2;
    cfg.model.enc.kernels = {5, 3, 3, 3};
    cfg.model.enc.strides = {2, 2, 1, 1};
    cfg.model.enc.multipliers = {2, 4, 8, 8};
    cfg.model.stage.dim = 8;
    cfg.model.stage.heads = 2;
    cfg.model.stage.layers = {1, 1, 1};
    cfg.model.stage.mlp_ratio = 2;
    cfg.model.n_classes = 2;
    cfg.model.input_len = 64;
    cfg.pipe.target_fs = 100;
    cfg.pipe.segment_seconds = 0.64;
    cfg.pipe.fir_taps = 31;
    cfg.batch_size = 4;
    cfg.epochs = 4;
    cfg.save_every = 2;
    cfg.seed = 5;

    const auto r1 = train(cfg, manifest, data, scratch_dir("determinism/a"));
    const auto r2 = train(cfg, manifest, data, scratch_dir("determinism/b"));
    const bool rerun_equal = slurp(r1.log_path) == slurp(r2.log_path) &&
                             slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path);

    const std::string mid = scratch_dir("determinism/a") + "/checkpoint_epoch2.bin";
    const auto r3 = train(cfg, manifest, data, scratch_dir("determinism/c"), mid);
    const bool resume_equal =
        slurp(r3.checkpoint_path) == slurp(r1.checkpoint_path);

    const Recording rec = load_recording(data + "/" + manifest.entries[0].path);
    const auto fa = export_attention(r1.checkpoint_path, rec,
                                     scratch_dir("determinism/viz_a"));
    const auto fb = export_attention(r1.checkpoint_path, rec,
                                     scratch_dir("determinism/viz_b"));
    bool export_equal = fa == fb;
    for (size_t i = 0; export_equal && i < fa.size(); ++i)
        export_equal = slurp(scratch_dir("determinism/viz_a") + "/" + fa[i]) ==
                       slurp(scratch_dir("determinism/viz_b") + "/" + fb[i]);

    const bool pass = rerun_equal && resume_equal && export_equal;
    return {pass, std::string("rerun logs+checkpoints byte-identical: ") +
                      (rerun_equal ? "yes" : "NO") +
                      "; resumed checkpoint byte-identical: " +
                      (resume_equal ? "yes" : "NO") + "; " +
                      std::to_string(fa.size()) + " exported files byte-stable: " +
                      (export_equal ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// 9. CLI contract.

int run_cli(const std::string& args) {
    const std::string log = (g_scratch / "cli" / "cli_log.txt").string();
    const std::string cmd = "\"" + g_cli + "\" " + args + " >> \"" + log + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status < 0) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Result criterion_cli() {
    if (g_cli.empty()) return {false, "no CLI path was given on the command line"};
    const auto t0 = std::chrono::steady_clock::now();
    const std::string dir = scratch_dir("cli");

    std::ofstream(dir + "/spec.json")
        << R"({"n_recordings":24,"leads":2,"duration_s":2.5,"fs":100,"noise_std":0.02,"seed":33,)"
        << R"("classes":[{"name":"normal"},)"
        << R"({"name":"peaked-t","amp_mult":{"T":2.0},"width_mult":{"T":0.6}}]})";

    TrainConfig cfg;
    cfg.model.enc.leads = 2;
    cfg.model.enc.kernels = {5, 3, 3, 3};
    cfg.model.enc.strides = {2, 2, 1, 1};
    cfg.model.enc.multipliers = {2, 4, 8, 8};
    cfg.model.stage.dim = 8;
    cfg.model.stage.heads = 2;
    cfg.model.stage.layers = {1, 1, 1};
    cfg.model.stage.mlp_ratio = 2;
    cfg.model.n_classes = 2;
    cfg.model.input_len = 0;  // resolved from the pipeline on load
    cfg.pipe.target_fs = 100;
    cfg.pipe.segment_seconds = 0.64;
    cfg.pipe.fir_taps = 31;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.seed = 40;
    std::ofstream(dir + "/train.json") << train_config_to_json(cfg);

    save_weight_matrix(WeightMatrix::identity({"normal", "peaked-t"}),
                       dir + "/weights.csv");

    std::vector<std::pair<std::string, std::string>> steps{
        {"synth", "synth --spec " + dir + "/spec.json --out " + dir + "/data"},
        {"split", "split --manifest " + dir + "/data/manifest.jsonl --folds 3 --seed 1"},
        {"train", "train --config " + dir + "/train.json --manifest " + dir +
                      "/data/manifest.jsonl --out " + dir + "/run"},
        {"eval", "eval --checkpoint " + dir + "/run/checkpoint.bin --manifest " +
                     dir + "/data/manifest.jsonl --report " + dir +
                     "/eval.json --predictions " + dir + "/preds.csv"},
        {"score", "score --predictions " + dir + "/preds.csv --manifest " + dir +
                      "/data/manifest.jsonl --weights " + dir +
                      "/weights.csv --report " + dir + "/score.json"},
        {"export-attn", "export-attn --checkpoint " + dir +
                            "/run/checkpoint.bin --data-root " + dir +
                            "/data --id synth-000000 --out " + dir +
                            "/viz --classes " + dir + "/data/classes.txt"},
        {"gradcheck", "gradcheck --seed 3 --instances 5"},
    };
    std::string failed;
    for (const auto& [name, args] : steps) {
        const int code = run_cli(args);
        if (code != 0) {
            failed = name + " exited " + std::to_string(code);
            break;
        }
    }

    bool artifacts = failed.empty();
    for (const char* f : {"run/checkpoint.bin", "eval.json", "preds.csv",
                          "score.json", "viz/lead_attribution.csv"})
        artifacts = artifacts && fs::exists(fs::path(dir) / f);
    if (artifacts) {
        const auto report = EvalReport::from_json_string(slurp(dir + "/score.json"));
        artifacts = report.n_recordings == 24 && report.n_classes == 2;
    }

    const double wall = seconds_since(t0);
    const bool pass = failed.empty() && artifacts && wall < 600.0;
    return {pass, (failed.empty()
                       ? std::string("all 7 subcommands exited 0") +
                             (artifacts ? ", artifacts verified"
                                        : ", but artifacts are missing or wrong")
                       : failed) +
                      "; " + fmt1(wall) + "s (limit 600)"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli = argv[1];
    g_scratch = fs::temp_directory_path() / "ecgformer_acceptance";
    fs::remove_all(g_scratch);
    fs::create_directories(g_scratch);

    struct Criterion {
        const char* label;
        Result (*fn)();
    };
    const std::array<Criterion, 9> criteria{{
        {"gradient suite", criterion_gradients},
        {"metric oracle equivalence", criterion_metrics},
        {"attention invariants", criterion_attention},
        {"lead isolation", criterion_lead_isolation},
        {"CLS propagation", criterion_cls_boundary},
        {"overfit check", criterion_overfit},
        {"desk-scale learning signal", criterion_learning},
        {"determinism and round-trips", criterion_determinism},
        {"CLI contract", criterion_cli},
    }};

    bool all = true;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Result r;
        try {
            r = criteria[i].fn();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] criterion %zu: %s (%s)\n", r.pass ? "PASS" : "FAIL",
                    i + 1, criteria[i].label, r.detail.c_str());
        std::fflush(stdout);
        all = all && r.pass;
    }
    std::printf("acceptance: %s\n", all ? "PASS" : "FAIL");
    return all ? 0 : 1;
}
