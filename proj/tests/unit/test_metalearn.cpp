#include "doctest.h"

#include "oracles.hpp"

#include "lsm/error.hpp"
#include "lsm/meta_learner.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

using namespace lsm;

namespace {

struct Family {
    std::vector<FeatureVector> pool;
    std::vector<MetaTask> tasks;
};

// Tasks of `n` uniform samples labeled by rule A (x0 > 0.6) on even ids and rule B (x1 < 0.4) on odd ids.
Family rule_family(Rng& rng, int count, int n, int dim) {
    Family f;
    for (int t = 0; t < count; ++t) {
        MetaTask task;
        task.task_id = t;
        for (int i = 0; i < n; ++i) {
            FeatureVector v;
            v.values = Vector(dim);
            for (int j = 0; j < dim; ++j) v.values(j) = rng.uniform();
            v.label = t % 2 == 0 ? (v.values(0) > 0.6 ? 1 : 0) : (v.values(1) < 0.4 ? 1 : 0);
            (*v.label ? task.positives : task.negatives) += 1;
            task.samples.push_back(f.pool.size());
            f.pool.push_back(v);
        }
        f.tasks.push_back(task);
    }
    return f;
}

double accuracy(const MlpParams& m, const LabeledBatch& b) {
    const Vector p = forward_batch(m, b.x);
    double ok = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) ok += ((p(i) >= 0.5) == (b.y(i) > 0.5)) ? 1.0 : 0.0;
    return ok / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("inner adaptation basics") {
    Rng rng(1);
    const MlpParams theta = oracle::random_mlp(rng, 3, {4}, Activation::sigmoid);
    const LabeledBatch support = oracle::random_batch(rng, 5, 3);
    const MlpParams same = inner_adapt(theta, support, 0.1, 0);
    for (std::size_t l = 0; l < theta.layers.size(); ++l) CHECK(same.layers[l].weight == theta.layers[l].weight);
    CHECK_THROWS_AS(inner_adapt(theta, LabeledBatch{}, 0.1, 5), ArgumentError);
    CHECK_THROWS_AS(few_shot_adapt(theta, LabeledBatch{}), ArgumentError);

    const MlpParams adapted = few_shot_adapt(theta, support);
    REQUIRE(adapted.layers.size() == theta.layers.size());
    for (std::size_t l = 0; l < theta.layers.size(); ++l) {
        CHECK(adapted.layers[l].weight.rows() == theta.layers[l].weight.rows());
        CHECK(adapted.layers[l].weight.cols() == theta.layers[l].weight.cols());
        CHECK(adapted.layers[l].activation == theta.layers[l].activation);
    }
    const ParamList direct = inner_sgd(theta.tensors(), support, 0.1, 5, mlp_loss_fn(theta.activations()));
    const ParamList via = adapted.tensors();
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(direct[i] == via[i]);
}

TEST_CASE("quadratic head decays geometrically") {
    const LossFn quad = [](Tape& t, std::span<const Var> p, const LabeledBatch&) {
        return t.scale(t.sum(t.cmul(p[0], p[0])), 0.5);
    };
    LabeledBatch dummy{Matrix::Zero(1, 1), Vector::Zero(1)};
    const ParamList out = inner_sgd({Matrix::Constant(1, 1, 1.0)}, dummy, 0.1, 5, quad);
    CHECK(std::abs(out[0](0, 0) - 0.59049) < 1e-12);
}

TEST_CASE("support loss does not rise at the default step size") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const MlpParams theta = make_mlp(6, std::vector<Eigen::Index>{8, 8}, Activation::sigmoid, rng);
        const LabeledBatch s = oracle::random_batch(rng, 5, 6);
        const double before = mean_cross_entropy(forward_batch(theta, s.x), s.y);
        const double after = mean_cross_entropy(forward_batch(few_shot_adapt(theta, s), s.x), s.y);
        CHECK(after <= before);
    }
}

TEST_CASE("single positive sample gains probability") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const MlpParams theta = make_mlp(4, std::vector<Eigen::Index>{6}, Activation::sigmoid, rng);
        LabeledBatch s{Matrix(1, 4), Vector::Ones(1)};
        for (Eigen::Index j = 0; j < 4; ++j) s.x(0, j) = rng.uniform();
        CHECK(forward_batch(few_shot_adapt(theta, s), s.x)(0) > forward_batch(theta, s.x)(0));
    }
}

TEST_CASE("meta_train contracts") {
    Rng rng(4);
    Family f = rule_family(rng, 8, 10, 4);
    split_all(f.tasks, f.pool, KShot::fixed(4), 1);
    const MlpParams f0 = make_mlp(4, std::vector<Eigen::Index>{6}, Activation::sigmoid, rng);

    MetaConfig cfg;
    cfg.meta_epochs = 0;
    const IntermediateModel none = meta_train(f0, f.tasks, f.pool, 80, cfg);
    CHECK(none.params.layers[0].weight == f0.layers[0].weight);
    CHECK(none.log.empty());

    cfg.meta_epochs = 20;
    cfg.seed = 9;
    const IntermediateModel a = meta_train(f0, f.tasks, f.pool, 80, cfg);
    const IntermediateModel b = meta_train(f0, f.tasks, f.pool, 80, cfg);
    for (std::size_t l = 0; l < f0.layers.size(); ++l) {
        CHECK(a.params.layers[l].weight == b.params.layers[l].weight);
        CHECK(a.params.layers[l].bias == b.params.layers[l].bias);
    }
    REQUIRE(a.log.size() == 20);
    CHECK(a.log[0].task_ids.size() == 4);

    std::ostringstream csv;
    write_meta_log_csv(csv, a.log);
    CHECK(csv.str().rfind("epoch,meta_loss,task_ids\n0,", 0) == 0);

    CHECK_THROWS_AS(meta_train(f0, {}, f.pool, 80, cfg), ArgumentError);
    MetaConfig bad = cfg;
    bad.inner_steps = 0;
    CHECK_THROWS_AS(meta_train(f0, f.tasks, f.pool, 80, bad), ConfigError);

    Family poisoned = f;
    poisoned.pool[poisoned.tasks[0].query[0]].values(0) = std::nan("");
    MetaConfig one = cfg;
    one.meta_epochs = 50;
    CHECK_THROWS_AS(meta_train(f0, std::span<const MetaTask>(poisoned.tasks.data(), 1), poisoned.pool, 80, one),
                    DivergenceError);
}

TEST_CASE("softmax weights on equal-size tasks give the plain mean gradient") {
    Rng rng(5);
    Family f = rule_family(rng, 6, 8, 3);
    split_all(f.tasks, f.pool, KShot::fixed(3), 2);
    const MlpParams theta = make_mlp(3, std::vector<Eigen::Index>{5}, Activation::sigmoid, rng);
    const std::vector<std::size_t> picks{0, 3, 5, 3};
    const auto soft = weighted_batch(f.tasks, picks, f.pool, 48, TaskWeighting::softmax);
    const auto flat = weighted_batch(f.tasks, picks, f.pool, 48, TaskWeighting::uniform);
    for (const auto& t : soft) CHECK(t.weight == 0.25);
    const LossFn loss = mlp_loss_fn(theta.activations());
    const MetaGradient gs = meta_grad(theta.tensors(), soft, 0.1, 5, GradMode::second_order, loss);
    const MetaGradient gu = meta_grad(theta.tensors(), flat, 0.1, 5, GradMode::second_order, loss);
    for (std::size_t i = 0; i < gs.gradient.size(); ++i) CHECK(gs.gradient[i] == gu.gradient[i]);
}

TEST_CASE("end-to-end meta-gradient matches finite differences") {
    Rng rng(6);
    Family f = rule_family(rng, 4, 7, 3);
    split_all(f.tasks, f.pool, KShot::fixed(3), 3);
    for (int trial = 0; trial < 5; ++trial) {
        const MlpParams theta = oracle::random_mlp(rng, 3, {4}, Activation::sigmoid);
        const std::vector<std::size_t> picks{0, 1, 2};
        const auto batch = weighted_batch(f.tasks, picks, f.pool, 28, TaskWeighting::softmax);
        const LossFn loss = mlp_loss_fn(theta.activations());
        const MetaGradient g = meta_grad(theta.tensors(), batch, 0.1, 2, GradMode::second_order, loss);
        const ParamList fd = oracle::finite_difference(
            theta.tensors(),
            [&](const ParamList& p) {
                double total = 0.0;
                for (const auto& t : batch) {
                    const MlpParams adapted = theta.with_tensors(inner_sgd(p, t.support, 0.1, 2, loss));
                    total += t.weight * oracle::loss_ref(adapted, t.query);
                }
                return total;
            },
            1e-5);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            for (Eigen::Index j = 0; j < fd[i].size(); ++j) {
                CHECK(oracle::relative_error(g.gradient[i].data()[j], fd[i].data()[j], 1e-6) < 1e-4);
            }
        }
    }
}

TEST_CASE("meta-training on one task lowers its query loss") {
    Rng rng(7);
    Family f = rule_family(rng, 1, 12, 4);
    MetaTask& t = f.tasks[0];
    t.support = t.samples;
    t.query = t.samples;
    const MlpParams f0 = make_mlp(4, std::vector<Eigen::Index>{8}, Activation::sigmoid, rng);
    MetaConfig cfg;
    cfg.meta_epochs = 300;
    cfg.meta_lr = 1e-3;
    cfg.task_batch_size = 1;
    const IntermediateModel m = meta_train(f0, f.tasks, f.pool, 12, cfg);
    double first = 0.0, last = 0.0;
    for (int e = 0; e < 100; ++e) {
        first += m.log[static_cast<std::size_t>(e)].loss;
        last += m.log[static_cast<std::size_t>(200 + e)].loss;
    }
    CHECK(last < first);
}

TEST_CASE("meta-learned initialization adapts to both rules") {
    Rng rng(12);
    Family train = rule_family(rng, 40, 20, 4);
    Family held_out = rule_family(rng, 20, 20, 4);
    split_all(train.tasks, train.pool, KShot::fixed(5), 1);
    split_all(held_out.tasks, held_out.pool, KShot::fixed(5), 2);
    const MlpParams f0 = make_mlp(4, std::vector<Eigen::Index>{16}, Activation::sigmoid, rng);
    MetaConfig cfg;
    cfg.alpha = 1.0;
    cfg.meta_lr = 1e-2;
    cfg.meta_epochs = 1000;
    cfg.seed = 3;
    const IntermediateModel m = meta_train(f0, train.tasks, train.pool, total_samples(train.tasks), cfg);

    double adapted_a = 0.0, adapted_b = 0.0, plain = 0.0;
    for (const auto& t : held_out.tasks) {
        const LabeledBatch support = gather(held_out.pool, t.support);
        const LabeledBatch query = gather(held_out.pool, t.query);
        const double acc = accuracy(few_shot_adapt(m.params, support, cfg.alpha, cfg.inner_steps), query);
        (t.task_id % 2 == 0 ? adapted_a : adapted_b) += acc / 10.0;
        plain += accuracy(m.params, query) / 20.0;
    }
    MESSAGE("held-out query accuracy: rule A " << adapted_a << ", rule B " << adapted_b << ", unadapted " << plain);
    CHECK(adapted_a >= 0.85);
    CHECK(adapted_b >= 0.85);
    CHECK(plain <= 0.70);
}
