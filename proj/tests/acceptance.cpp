// Acceptance suite: one check per release criterion, one pass/fail line each.
// Returns nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "afford3d/harness.hpp"
#include "helpers.hpp"

using namespace afford3d;
using testutil::Rng;
using testutil::grad_check;
using testutil::random_tensor;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool shape_is(const Tensor& t, std::vector<int> shape) { return t.shape() == shape; }

// ------------------------------------------------------------- criterion 1

bool check_shapes(std::string& detail) {
    DatasetSplit data = generate_synthetic(1001, 1, kCanonicalPoints);
    const AffordanceSample& s = data.train[0];
    TrainConfig cfg;  // full-size defaults: 512 channels, 64/128 regions, 224 resize
    cfg.seed = 7;
    AffordModel model(model_config(cfg));

    ag::NoGradGuard guard;
    const auto t0 = std::chrono::steady_clock::now();
    ForwardTrace trace;
    const Prediction pred = model.forward(s.cloud, s.image, &trace);
    const double dt = seconds_since(t0);

    bool ok = true;
    ok &= shape_is(trace.image_embedding, {512, 7, 7});
    for (const Tensor* t : {&trace.f_object, &trace.f_subject, &trace.f_scene, &trace.context,
                            &trace.context_large, &trace.context_small, &trace.context_final})
        ok &= shape_is(*t, {512, 16});
    ok &= shape_is(trace.regions_large, {512, 64});
    ok &= shape_is(trace.regions_small, {512, 128});
    ok &= shape_is(trace.graph_large, {64, 64});
    ok &= shape_is(trace.graph_small, {128, 128});
    ok &= shape_is(trace.fused_large, {512, 64});
    ok &= shape_is(trace.fused_small, {512, 128});
    ok &= shape_is(trace.refined_large, {512, 64});
    ok &= shape_is(trace.refined_small, {512, 128});
    ok &= shape_is(trace.per_point, {512, 2048});
    ok &= shape_is(trace.mask, {2048, 1});
    ok &= trace.class_logits.numel() == 17;
    const int label = pred.predicted_label();
    ok &= label >= 0 && label < 17;
    ok &= dt < 1.0;

    char buf[128];
    std::snprintf(buf, sizeof(buf), "all tensor dimensions exact, forward %.3fs", dt);
    detail = buf;
    return ok;
}

// ------------------------------------------------------------- criterion 2

double auc_pair_oracle(const std::vector<double>& pred, const std::vector<double>& gt) {
    double score = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!(gt[i] > 0.5)) continue;
        for (size_t j = 0; j < pred.size(); ++j) {
            if (gt[j] > 0.5) continue;
            ++pairs;
            if (pred[i] > pred[j])
                score += 1.0;
            else if (pred[i] == pred[j])
                score += 0.5;
        }
    }
    return 100.0 * score / static_cast<double>(pairs);
}

bool check_metric_oracles(std::string& detail) {
    Rng rng(2024);
    double worst = 0.0;
    int done = 0;
    while (done < 200) {
        const int n = 4 + static_cast<int>(rng.uniform_int(61));
        std::vector<double> pred(n), gt(n);
        bool pos = false, neg = false;
        for (int i = 0; i < n; ++i) {
            pred[i] = std::floor(rng.uniform() * 10.0) / 10.0;  // ties occur
            gt[i] = std::floor(rng.uniform() * 4.0) / 4.0;
            (gt[i] > 0.5 ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        ++done;

        worst = std::max(worst, std::fabs(*metrics::auc(pred, gt) - auc_pair_oracle(pred, gt)));

        // aiou loop oracle
        double total = 0.0;
        for (int t = 1; t <= 99; ++t) {
            const double thr = t / 100.0;
            double tp = 0, fp = 0, fn = 0;
            for (int i = 0; i < n; ++i) {
                const bool p = pred[i] >= thr;
                const bool g = gt[i] > 0.5;
                tp += (p && g) ? 1 : 0;
                fp += (p && !g) ? 1 : 0;
                fn += (!p && g) ? 1 : 0;
            }
            total += tp / (tp + fp + fn);
        }
        worst = std::max(worst, std::fabs(*metrics::aiou(pred, gt) - 100.0 * total / 99.0));

        // sim oracle on strictly positive maps
        std::vector<double> p2(pred), g2(gt);
        for (auto& v : p2) v += 0.05;
        for (auto& v : g2) v += 0.05;
        double sp = 0, sg = 0;
        for (const double v : p2) sp += v;
        for (const double v : g2) sg += v;
        double s = 0;
        for (int i = 0; i < n; ++i) s += std::min(p2[i] / sp, g2[i] / sg);
        worst = std::max(worst, std::fabs(metrics::sim(p2, g2) - s));

        double abs_sum = 0;
        for (int i = 0; i < n; ++i) abs_sum += std::fabs(pred[i] - gt[i]);
        worst = std::max(worst, std::fabs(metrics::mae(pred, gt) - abs_sum / n));

        std::vector<int> pl(n), gl(n);
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            pl[i] = static_cast<int>(rng.uniform_int(4));
            gl[i] = static_cast<int>(rng.uniform_int(4));
            hits += pl[i] == gl[i];
        }
        worst = std::max(worst, std::fabs(metrics::acc(pl, gl) - 100.0 * hits / n));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "200 instances, max |err| = %.2e", worst);
    detail = buf;
    return worst <= 1e-9;
}

// ------------------------------------------------------------- criterion 3

bool check_gradients(std::string& detail) {
    Rng rng(3003);
    double worst = 0.0;
    const int kPoints = 20;

    {  // scene gate
        ImageBranch branch(8, 2, 64, true, 31);
        ag::Var f_e(random_tensor({8, 16}, rng), true);
        ag::Var f_s(random_tensor({8, 16}, rng), true);
        auto loss = [&] {
            const auto out = branch.scene_gate(f_e, f_s);
            return ag::mean_all(ag::mul(out.tokens, out.tokens));
        };
        worst = std::max(worst, grad_check(f_e, loss, kPoints, rng));
        worst = std::max(worst, grad_check(f_s, loss, kPoints, rng));
    }
    {  // cross-modal fusion, both directions
        Fusion fusion(8, 2, true, 33);
        ag::Var regions(random_tensor({8, 6}, rng), true);
        ag::Var ctx(random_tensor({8, 8}, rng), true);
        auto loss = [&] {
            const ag::Var fused = fusion.fuse_regions(regions, ctx, RegionScale::large);
            const ag::Var c2 = fusion.fuse_context(ctx, fused, RegionScale::large);
            return ag::add(ag::mean_all(ag::mul(fused, fused)), ag::mean_all(ag::mul(c2, c2)));
        };
        worst = std::max(worst, grad_check(regions, loss, kPoints, rng));
        worst = std::max(worst, grad_check(ctx, loss, kPoints, rng));
    }
    {  // reweight -> gcn -> select
        Propagation prop(8, 2, 8, false, 35);
        PointCloud cloud;
        cloud.coords = random_tensor({24, 3}, rng);
        RegionSet large, small;
        large.centers = random_tensor({4, 3}, rng);
        small.centers = random_tensor({6, 3}, rng);
        const SimilarityGraph gl = build_graph_from_features(random_tensor({8, 4}, rng));
        const SimilarityGraph gs = build_graph_from_features(random_tensor({8, 6}, rng));
        ag::Var fused_l(random_tensor({8, 4}, rng), true);
        ag::Var fused_s(random_tensor({8, 6}, rng), true);
        ag::Var raw_l(random_tensor({8, 4}, rng), true);
        ag::Var raw_s(random_tensor({8, 6}, rng), true);
        ag::Var ctx_l(random_tensor({8, 16}, rng), true);
        ag::Var ctx_s(random_tensor({8, 16}, rng), true);
        auto loss = [&] {
            PropagatedFeatures refined{
                prop.gcn_propagate(prop.reweight_init(fused_l, raw_l, RegionScale::large), gl,
                                   RegionScale::large),
                prop.gcn_propagate(prop.reweight_init(fused_s, raw_s, RegionScale::small), gs,
                                   RegionScale::small)};
            const SelectedFeatures sel =
                prop.select_and_upsample(refined, ctx_l, ctx_s, large, small, cloud);
            return ag::add(ag::mean_all(ag::mul(sel.per_point, sel.per_point)),
                           ag::mean_all(ag::mul(sel.context, sel.context)));
        };
        for (auto* leaf : {&fused_l, &fused_s, &raw_l, &raw_s, &ctx_l, &ctx_s})
            worst = std::max(worst, grad_check(*leaf, loss, kPoints, rng));
    }
    {  // both loss terms through the heads
        Heads heads(8, 8, 8, kNumAffordances, false, 37);
        ag::Var per_point(random_tensor({8, 24}, rng), true);
        ag::Var ctx(random_tensor({8, 16}, rng), true);
        std::vector<double> gt(24);
        for (int i = 0; i < 24; ++i) gt[i] = (i % 3 == 0) ? 1.0 : 0.15;
        auto loss = [&] {
            Prediction pred;
            pred.mask = heads.predict_mask(per_point);
            pred.class_logits = heads.predict_class(ctx, per_point, pred.mask).logits;
            AffordanceSample s;
            s.gt_mask = gt;
            s.label = 3;
            return total_loss(pred, s, 0.3).total_var;
        };
        worst = std::max(worst, grad_check(per_point, loss, kPoints, rng));
        worst = std::max(worst, grad_check(ctx, loss, kPoints, rng));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max relative error %.2e", worst);
    detail = buf;
    return worst < 1e-4;
}

// ------------------------------------------------------------- criterion 4

bool check_equivariance(std::string& detail) {
    Rng rng(4004);
    bool ok = true;
    double attn_err = 0.0, gcn_err = 0.0;

    {  // region pooling permutation invariance: bitwise
        PointBranch branch(32, 8, 8, 16, 41);
        PointCloud cloud;
        cloud.coords = random_tensor({64, 3}, rng, 0.5);
        const RegionSet base = branch.extract_regions(cloud, RegionScale::large);

        std::vector<int> perm(64);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        PointCloud shuffled;
        shuffled.coords = Tensor(64, 3);
        std::vector<int> inv(64);
        for (int i = 0; i < 64; ++i) {
            inv[perm[i]] = i;
            for (int d = 0; d < 3; ++d) shuffled.coords(i, d) = cloud.coords(perm[i], d);
        }
        std::vector<int> assign(64);
        for (int i = 0; i < 64; ++i) assign[i] = base.assignment[perm[i]];
        const ag::Var feats = branch.point_features(shuffled);
        const ag::Var pooled =
            PointBranch::center_regions(ag::segmented_max(feats, assign, 8));
        ok &= bitwise_equal(pooled.val(), base.features.val());
    }
    {  // fusion: permuting regions permutes outputs exactly, context moves < 1e-6
        Fusion fusion(16, 4, true, 43);
        const Tensor regions = random_tensor({16, 12}, rng);
        const Tensor ctx = random_tensor({16, 16}, rng);
        std::vector<int> perm(12);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        Tensor permuted(16, 12);
        for (int j = 0; j < 12; ++j)
            for (int i = 0; i < 16; ++i) permuted(i, j) = regions(i, perm[j]);
        const ag::Var base =
            fusion.fuse_regions(ag::Var(regions), ag::Var(ctx), RegionScale::large);
        const ag::Var moved =
            fusion.fuse_regions(ag::Var(permuted), ag::Var(ctx), RegionScale::large);
        for (int j = 0; j < 12; ++j)
            for (int i = 0; i < 16; ++i)
                ok &= moved.val()(i, j) == base.val()(i, perm[j]);
        const ag::Var cb = fusion.fuse_context(ag::Var(ctx), base, RegionScale::large);
        const ag::Var cm = fusion.fuse_context(ag::Var(ctx), moved, RegionScale::large);
        attn_err = max_abs_diff(cb.val(), cm.val());
        ok &= attn_err <= 1e-6;
    }
    {  // gcn: conjugating the graph permutes the output columns
        Propagation prop(12, 2, 8, false, 45);
        const int m = 14;
        const Tensor init = random_tensor({12, m}, rng);
        const SimilarityGraph g = build_graph_from_features(random_tensor({12, m}, rng));
        std::vector<int> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        Tensor init_p(12, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < 12; ++i) init_p(i, j) = init(i, perm[j]);
        SimilarityGraph gp;
        gp.normalized = Tensor(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) gp.normalized(i, j) = g.normalized(perm[i], perm[j]);
        const Tensor base = prop.gcn_propagate(ag::Var(init), g, RegionScale::large).val();
        const Tensor moved = prop.gcn_propagate(ag::Var(init_p), gp, RegionScale::large).val();
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < 12; ++i)
                gcn_err = std::max(gcn_err, std::fabs(moved(i, j) - base(i, perm[j])));
        ok &= gcn_err <= 1e-12;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "pooling bitwise, attention %.2e, gcn %.2e", attn_err,
                  gcn_err);
    detail = buf;
    return ok;
}

// ------------------------------------------------------------- criterion 5

bool check_partition_of_unity(std::string& detail) {
    Rng rng(5005);
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
        PointCloud cloud;
        cloud.coords = random_tensor({2048, 3}, rng);
        const Tensor centers = random_tensor({64, 3}, rng);
        const InterpWeights w = interp_weights(cloud.coords, centers);
        for (int p = 0; p < 2048; ++p) {
            const double sum = w.w[p][0] + w.w[p][1] + w.w[p][2];
            worst = std::max(worst, std::fabs(sum - 1.0));
            for (int k = 0; k < 3; ++k) ok &= w.w[p][k] >= -1e-12;
        }
        // constant field passes through exactly
        const ag::Var constant(Tensor::full({4, 64}, 1.0));
        const ag::Var up = ag::weighted_cols(constant, w.idx, w.w);
        for (size_t i = 0; i < up.val().numel(); ++i) ok &= up.val()[i] == 1.0;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |sum-1| = %.2e over 20 clouds", worst);
    detail = buf;
    return ok && worst <= 1e-7;
}

// ------------------------------------------------------------- criterion 6

bool check_overfit(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    DatasetSplit data = generate_synthetic(600, 25, 512);  // 20 train / 5 test
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 8;
    cfg.learning_rate = 2e-3;
    cfg.seed = 606;
    cfg.channels = 96;
    cfg.knn_k = 16;
    cfg.resize_to = 64;
    cfg.mask_hidden = 64;
    cfg.class_hidden = 64;
    cfg.gate_hidden = 32;
    cfg.eval_every = 10;

    double best_acc = 0.0, best_aiou = 0.0;
    int epochs_used = 0;
    const TrainResult result = train(cfg, data, nullptr, [&](int epoch, const AffordModel& m) {
        const auto report = evaluate(m, data.train);
        best_acc = report.acc;
        best_aiou = report.aiou;
        epochs_used = epoch;
        return report.acc == 100.0 && report.aiou >= 80.0;
    });
    const double dt = seconds_since(t0);

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "train ACC %.1f, aIoU %.1f after %d epochs, %.0fs (budget 900s)", best_acc,
                  best_aiou, epochs_used, dt);
    detail = buf;
    return best_acc == 100.0 && best_aiou >= 80.0 && dt <= 900.0;
}

// ------------------------------------------------------------- criterion 7

bool check_chance_level(std::string& detail) {
    DatasetSplit data = generate_synthetic(700, 63, 512);  // 50 train / 13 test
    std::vector<AffordanceSample> samples = data.train;
    for (const auto& s : data.test) samples.push_back(s);

    double mean_auc = 0.0;
    for (const uint64_t seed : {11u, 22u, 33u}) {
        TrainConfig cfg;
        cfg.seed = seed;
        cfg.channels = 64;
        cfg.knn_k = 8;
        cfg.resize_to = 64;
        cfg.mask_hidden = 32;
        cfg.class_hidden = 32;
        cfg.gate_hidden = 16;
        AffordModel model(model_config(cfg));
        const auto report = evaluate(model, samples);
        mean_auc += report.auc / 3.0;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "untrained AUC %.2f over %zu samples x 3 seeds", mean_auc,
                  samples.size());
    detail = buf;
    return mean_auc >= 45.0 && mean_auc <= 55.0;
}

// ------------------------------------------------------------- criterion 8

bool check_ablation_diffs(std::string& detail) {
    DatasetSplit data = generate_synthetic(800, 1, 256);
    const AffordanceSample& s = data.train[0];
    TrainConfig cfg;
    cfg.seed = 808;
    cfg.channels = 32;
    cfg.knn_k = 8;
    cfg.scale_large = 16;
    cfg.scale_small = 32;
    cfg.resize_to = 64;
    cfg.mask_hidden = 16;
    cfg.class_hidden = 16;
    cfg.gate_hidden = 8;

    ag::NoGradGuard guard;
    ForwardTrace base;
    AffordModel(model_config(cfg)).forward(s.cloud, s.image, &base);

    bool ok = true;
    {  // sg: image pipeline equal up to the gate, context diverges
        TrainConfig off = cfg;
        off.ablations.sg = false;
        ForwardTrace t;
        AffordModel(model_config(off)).forward(s.cloud, s.image, &t);
        ok &= bitwise_equal(t.image_embedding, base.image_embedding);
        ok &= bitwise_equal(t.f_object, base.f_object);
        ok &= bitwise_equal(t.f_subject, base.f_subject);
        ok &= bitwise_equal(t.f_scene, base.f_scene);
        ok &= bitwise_equal(t.f_entity, base.f_entity);
        ok &= bitwise_equal(t.f_scene_fused, base.f_scene_fused);
        ok &= !bitwise_equal(t.context, base.context);
        ok &= bitwise_equal(t.regions_small, base.regions_small);  // point path untouched
    }
    {  // gfpm: everything through fusion equal, refined collapses to fused
        TrainConfig off = cfg;
        off.ablations.gfpm = false;
        ForwardTrace t;
        AffordModel(model_config(off)).forward(s.cloud, s.image, &t);
        ok &= bitwise_equal(t.context, base.context);
        ok &= bitwise_equal(t.graph_large, base.graph_large);
        ok &= bitwise_equal(t.graph_small, base.graph_small);
        ok &= bitwise_equal(t.fused_large, base.fused_large);
        ok &= bitwise_equal(t.fused_small, base.fused_small);
        ok &= bitwise_equal(t.refined_large, t.fused_large);
        ok &= bitwise_equal(t.refined_small, t.fused_small);
        ok &= !bitwise_equal(t.refined_small, base.refined_small);
    }
    {  // cgc: identical mask, different logits
        TrainConfig off = cfg;
        off.ablations.cgc = false;
        ForwardTrace t;
        AffordModel(model_config(off)).forward(s.cloud, s.image, &t);
        ok &= bitwise_equal(t.mask, base.mask);
        ok &= bitwise_equal(t.per_point, base.per_point);
        ok &= bitwise_equal(t.context_final, base.context_final);
        ok &= !bitwise_equal(t.class_logits, base.class_logits);
    }
    {  // msi: small-scale path identical, selection bypassed
        TrainConfig off = cfg;
        off.ablations.msi = false;
        ForwardTrace t;
        AffordModel(model_config(off)).forward(s.cloud, s.image, &t);
        ok &= bitwise_equal(t.context, base.context);
        ok &= bitwise_equal(t.regions_small, base.regions_small);
        ok &= bitwise_equal(t.fused_small, base.fused_small);
        ok &= bitwise_equal(t.refined_small, base.refined_small);
        ok &= t.regions_large.numel() == 0;
        ok &= !bitwise_equal(t.per_point, base.per_point);
        ok &= bitwise_equal(t.context_final, t.context_small);
    }
    detail = "each flag rewires only its designated computation";
    return ok;
}

// ------------------------------------------------------------- criterion 9

bool check_cascade_coupling(std::string& detail) {
    Rng rng(9009);
    Heads heads(16, 16, 16, kNumAffordances, false, 91);
    const ag::Var ctx(random_tensor({16, 16}, rng));
    const ag::Var pts(random_tensor({16, 64}, rng));

    // zero mask -> the local classifier branch is exactly zero
    const auto zeroed = heads.predict_class(ctx, pts, ag::Var(Tensor::zeros({64, 1})));
    bool ok = true;
    for (size_t i = 0; i < zeroed.local_pool.numel(); ++i) ok &= zeroed.local_pool[i] == 0.0;

    // decoupled heads ignore the mask entirely
    Heads decoupled(16, 16, 16, kNumAffordances, true, 91);
    Tensor m1(64, 1), m2(64, 1);
    for (int i = 0; i < 64; ++i) {
        m1[i] = rng.uniform();
        m2[i] = rng.uniform();
    }
    const auto a = decoupled.predict_class(ctx, pts, ag::Var(m1));
    const auto b = decoupled.predict_class(ctx, pts, ag::Var(m2));
    ok &= bitwise_equal(a.logits.val(), b.logits.val());

    // coupled heads do depend on it
    const auto c = heads.predict_class(ctx, pts, ag::Var(m1));
    const auto d = heads.predict_class(ctx, pts, ag::Var(m2));
    ok &= !bitwise_equal(c.logits.val(), d.logits.val());

    detail = "zero mask zeroes the local branch; cgc-off is mask independent";
    return ok;
}

// ------------------------------------------------------------ criterion 10

bool check_determinism(std::string& detail) {
    DatasetSplit data = generate_synthetic(1000, 6, 128);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.seed = 321;
    cfg.channels = 24;
    cfg.knn_k = 6;
    cfg.scale_large = 8;
    cfg.scale_small = 16;
    cfg.resize_to = 32;
    cfg.mask_hidden = 16;
    cfg.class_hidden = 16;
    cfg.gate_hidden = 8;

    const TrainResult a = train(cfg, data);
    const TrainResult b = train(cfg, data);
    bool ok = a.step_losses.size() == b.step_losses.size();
    for (size_t i = 0; ok && i < a.step_losses.size(); ++i)
        ok &= a.step_losses[i] == b.step_losses[i];

    // checkpoint round-trip reproduces the forward bitwise
    const auto dir = std::filesystem::temp_directory_path() / "afford3d_acceptance";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "ckpt.bin").string();
    save_checkpoint(snapshot(*a.model, a.adam, cfg, a.epochs_run), path);
    const auto restored = model_from_checkpoint(load_checkpoint(path));
    ag::NoGradGuard guard;
    const Prediction pa = a.model->forward(data.train[0].cloud, data.train[0].image);
    const Prediction pb = restored->forward(data.train[0].cloud, data.train[0].image);
    ok &= bitwise_equal(pa.mask.val(), pb.mask.val());
    ok &= bitwise_equal(pa.class_logits.val(), pb.class_logits.val());
    std::filesystem::remove_all(dir);

    detail = "identical loss traces; save/load forward bitwise";
    return ok;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "shape conformance", check_shapes},
        {2, "metric oracle equivalence", check_metric_oracles},
        {3, "gradient integrity", check_gradients},
        {4, "equivariance suite", check_equivariance},
        {5, "upsampling partition of unity", check_partition_of_unity},
        {6, "overfit check", check_overfit},
        {7, "chance-level sanity", check_chance_level},
        {8, "ablation differentials", check_ablation_diffs},
        {9, "cascade coupling", check_cascade_coupling},
        {10, "determinism and checkpoint round-trip", check_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double dt = seconds_since(t0);
        std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), detail.c_str(), dt);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
