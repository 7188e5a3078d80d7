#include "csforest/csforest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "csforest/error.hpp"
#include "csforest/parallel.hpp"

namespace csforest {

void CsForestParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be a finite value >= 0");
    if (b_tilde < 1) throw ConfigError("b_tilde must be >= 1");
}

TreeCount sample_tree_count(std::size_t b_tilde, std::size_t n_k, Rng& rng) {
    if (b_tilde < 1 || n_k < 1) throw ConfigError("sample_tree_count needs b_tilde >= 1 and n_k >= 1");
    const double nk = static_cast<double>(n_k);
    const double p = std::pow(1.0 - 1.0 / (nk + 1.0), nk);
    TreeCount tc;
    for (;;) {
        tc.count = rng.binomial(b_tilde, p);
        if (tc.count > 0) return tc;
        ++tc.redraws;
    }
}

namespace {

std::size_t other_draw_count(double gamma, std::size_t m, std::size_t n_other) {
    if (gamma == 0.0 || n_other == 0) return 0;
    const auto wanted = static_cast<std::size_t>(std::ceil(static_cast<double>(m) * gamma));
    return std::min(wanted, n_other);
}

Matrix stack_rows(std::initializer_list<const Matrix*> parts, std::size_t dim) {
    std::size_t total = 0;
    for (auto* p : parts) total += p->rows();
    Matrix out(total, dim);
    std::size_t r = 0;
    for (auto* p : parts)
        for (std::size_t i = 0; i < p->rows(); ++i, ++r) std::copy_n(p->row(i).begin(), dim, out.row(r).begin());
    return out;
}

void check_dims(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols())
        throw DataError(std::string("feature dimension mismatch between class rows and ") + what);
}

} // namespace

ClassEnsemble build_class_ensemble(const Matrix& train_k, const Matrix& train_other, const Matrix& test,
                                   int class_index, const CsForestParams& params) {
    params.validate();
    if (train_k.rows() == 0) throw DataError("class " + std::to_string(class_index) + " has no training rows");
    if (test.rows() == 0) throw DataError("test cohort is empty");
    check_dims(train_k, test, "test rows");
    check_dims(train_k, train_other, "other-class rows");
    const std::size_t dim = train_k.cols();
    params.tree.validate(dim);

    const std::size_t n_k = train_k.rows(), m = test.rows(), n_o = train_other.rows();
    const Matrix pool = stack_rows({&train_k, &test, &train_other}, dim);
    const auto k = static_cast<std::uint64_t>(class_index);

    ClassEnsemble ens;
    ens.class_index = class_index;
    ens.train_size = n_k;
    ens.test_size = m;
    ens.other_draws = other_draw_count(params.gamma, m, n_o);
    Rng count_rng(derive_seed(params.seed, "tree_count", k));
    ens.tree_count = sample_tree_count(params.b_tilde, n_k, count_rng);

    const std::size_t B = ens.tree_count.count;
    ens.trees.resize(B);
    ens.train_in_bag.resize(B);
    ens.test_in_bag.resize(B);
    ens.train_fraction = Matrix(B, n_k);
    ens.test_fraction = Matrix(B, m);

    parallel_for(B, params.threads, [&](std::size_t b) {
        Rng rng(derive_seed(params.seed, "tree", k, b));
        auto tr = bootstrap_indices(n_k, rng);
        auto te = bootstrap_indices(m, rng);
        auto ot = bootstrap_indices(n_o, ens.other_draws, rng);
        std::vector<std::size_t> rows;
        std::vector<int> labels;
        rows.reserve(n_k + m + ens.other_draws);
        labels.reserve(rows.capacity());
        for (auto d : tr.draws) rows.push_back(d), labels.push_back(kTargetLabel);
        for (auto d : te.draws) rows.push_back(n_k + d), labels.push_back(kTestLabel);
        for (auto d : ot.draws) rows.push_back(n_k + m + d), labels.push_back(kOtherLabel);
        ens.trees[b] = fit_tree(pool, rows, labels, kEnsembleAlphabet, params.tree, rng);
        for (std::size_t i = 0; i < n_k; ++i)
            ens.train_fraction(b, i) = ens.trees[b].leaf_fractions(pool.row(i))[kTargetLabel];
        for (std::size_t i = 0; i < m; ++i)
            ens.test_fraction(b, i) = ens.trees[b].leaf_fractions(pool.row(n_k + i))[kTargetLabel];
        ens.train_in_bag[b] = std::move(tr.in_bag);
        ens.test_in_bag[b] = std::move(te.in_bag);
    });
    return ens;
}

std::optional<double> pair_ensemble_fraction(const ClassEnsemble& ens, std::size_t test_index,
                                             std::size_t train_index, std::span<const double> x) {
    if (test_index >= ens.test_size || train_index >= ens.train_size)
        throw DataError("pair index out of range");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < ens.size(); ++b) {
        if (ens.test_in_bag[b].test(test_index) || ens.train_in_bag[b].test(train_index)) continue;
        sum += ens.trees[b].predict_fraction(x, kTargetLabel);
        ++count;
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

namespace {

// Per-sample views over the B trees of one ensemble: which trees leave the
// sample out of bag, as a bit set and as 0/1 weights, and the cached class-k
// fraction masked to those trees.
struct OutOfBagColumns {
    std::size_t trees = 0;
    std::size_t words = 0;
    std::vector<std::uint64_t> bits;  // samples x words
    std::vector<double> indicator;    // samples x trees
    std::vector<double> masked;       // samples x trees

    OutOfBagColumns(const std::vector<BitMask>& in_bag, const Matrix& fraction, std::size_t samples)
        : trees(in_bag.size()), words((in_bag.size() + 63) / 64), bits(samples * words, 0),
          indicator(samples * trees, 0.0), masked(samples * trees, 0.0) {
        for (std::size_t b = 0; b < trees; ++b) {
            for (std::size_t s = 0; s < samples; ++s) {
                if (in_bag[b].test(s)) continue;
                bits[s * words + (b >> 6)] |= std::uint64_t{1} << (b & 63);
                indicator[s * trees + b] = 1.0;
                masked[s * trees + b] = fraction(b, s);
            }
        }
    }
};

} // namespace

ScoreMatrix calibrated_scores(std::span<const ClassEnsemble> ensembles, std::size_t threads) {
    if (ensembles.empty()) throw DataError("no class ensembles to score");
    const std::size_t m = ensembles.front().test_size;
    for (const auto& e : ensembles)
        if (e.test_size != m) throw DataError("ensembles were built on different test cohorts");

    ScoreMatrix out;
    out.scores = Matrix(m, ensembles.size());
    for (std::size_t k = 0; k < ensembles.size(); ++k) {
        const ClassEnsemble& ens = ensembles[k];
        const std::size_t n_k = ens.train_size, B = ens.size();
        out.class_sizes.push_back(n_k);
        const OutOfBagColumns te(ens.test_in_bag, ens.test_fraction, m);
        const OutOfBagColumns tr(ens.train_in_bag, ens.train_fraction, n_k);
        std::vector<std::size_t> degenerate(m, 0);

        parallel_for(m, threads, [&](std::size_t i) {
            const std::uint64_t* te_bits = &te.bits[i * te.words];
            const double* te_ind = &te.indicator[i * B];
            const double* te_val = &te.masked[i * B];
            std::size_t successes = 0;
            for (std::size_t j = 0; j < n_k; ++j) {
                const std::uint64_t* tr_bits = &tr.bits[j * tr.words];
                std::size_t shared = 0;
                for (std::size_t w = 0; w < te.words; ++w) shared += std::popcount(te_bits[w] & tr_bits[w]);
                if (shared == 0) {
                    ++degenerate[i];
                    ++successes;
                    continue;
                }
                const double* tr_ind = &tr.indicator[j * B];
                const double* tr_val = &tr.masked[j * B];
                // Sums run in tree order over the leave-pair-out trees only
                // (other terms are exact zeros).
                double at_test = 0.0, at_train = 0.0;
                for (std::size_t b = 0; b < B; ++b) {
                    at_test += te_val[b] * tr_ind[b];
                    at_train += te_ind[b] * tr_val[b];
                }
                const double denom = static_cast<double>(shared);
                if (at_test / denom >= at_train / denom) ++successes;
            }
            out.scores(i, k) = static_cast<double>(1 + successes) / static_cast<double>(n_k + 1);
        });
        for (auto d : degenerate) out.degenerate_pairs += d;
    }
    return out;
}

PredictionSets prediction_sets(const ScoreMatrix& scores, double alpha, std::vector<std::string> class_names) {
    return threshold_scores(scores.scores, alpha, std::move(class_names));
}

CsForestResult run_csforest(const Dataset& train, const Dataset& test, const CsForestParams& params) {
    params.validate();
    if (train.dim() != test.dim()) throw DataError("train and test feature dimensions differ");
    const std::size_t K = train.num_classes();
    if (K == 0) throw DataError("training data has no classes");
    for (int y : train.labels())
        if (y < 0) throw DataError("training rows must all carry class labels");

    std::vector<ClassEnsemble> ensembles;
    ensembles.reserve(K);
    CsForestResult result;
    for (std::size_t k = 0; k < K; ++k) {
        const auto rows_k = train.rows_with_label(static_cast<int>(k));
        if (rows_k.empty()) throw DataError("class '" + train.class_names()[k] + "' has no training rows");
        std::vector<std::size_t> rows_other;
        for (std::size_t i = 0; i < train.size(); ++i)
            if (train.label(i) != static_cast<int>(k)) rows_other.push_back(i);
        const Matrix xk = train.features().select_rows(rows_k);
        const Matrix xo = train.features().select_rows(rows_other);
        ensembles.push_back(build_class_ensemble(xk, xo, test.features(), static_cast<int>(k), params));
        result.tree_counts.push_back(ensembles.back().tree_count);
    }
    result.scores = calibrated_scores(ensembles, params.threads);
    result.sets = prediction_sets(result.scores, params.alpha, train.class_names());
    return result;
}

AuditRecord audit_strange_set(const Matrix& train_k, const Matrix& train_other, const Matrix& test,
                              std::size_t held_test_index, double alpha, const CsForestParams& params) {
    params.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (train_k.rows() == 0) throw DataError("audit needs class rows");
    if (held_test_index >= test.rows()) throw DataError("held test index out of range");
    check_dims(train_k, test, "test rows");
    check_dims(train_k, train_other, "other-class rows");
    const std::size_t dim = train_k.cols();
    params.tree.validate(dim);

    const std::size_t n = train_k.rows(), pool_size = n + 1;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < test.rows(); ++i)
        if (i != held_test_index) rest.push_back(i);
    const Matrix held = test.select_rows(std::span<const std::size_t>(&held_test_index, 1));
    const Matrix others = test.select_rows(rest);
    const Matrix combined = stack_rows({&train_k, &held, &others, &train_other}, dim);
    const std::size_t m_rest = others.rows(), n_o = train_other.rows();
    const std::size_t other_draws = other_draw_count(params.gamma, test.rows(), n_o);

    const std::size_t B = params.b_tilde;
    std::vector<BitMask> in_pool_bag(B);
    Matrix fraction(B, pool_size);
    parallel_for(B, params.threads, [&](std::size_t b) {
        Rng rng(derive_seed(params.seed, "audit", b));
        auto pl = bootstrap_indices(pool_size, n, rng);
        auto te = bootstrap_indices(m_rest, rng);
        auto ot = bootstrap_indices(n_o, other_draws, rng);
        std::vector<std::size_t> rows;
        std::vector<int> labels;
        for (auto d : pl.draws) rows.push_back(d), labels.push_back(kTargetLabel);
        for (auto d : te.draws) rows.push_back(pool_size + d), labels.push_back(kTestLabel);
        for (auto d : ot.draws) rows.push_back(pool_size + m_rest + d), labels.push_back(kOtherLabel);
        const TreeModel tree = fit_tree(combined, rows, labels, kEnsembleAlphabet, params.tree, rng);
        for (std::size_t l = 0; l < pool_size; ++l)
            fraction(b, l) = tree.leaf_fractions(combined.row(l))[kTargetLabel];
        in_pool_bag[b] = std::move(pl.in_bag);
    });

    AuditRecord rec;
    rec.n = n;
    rec.alpha = alpha;
    rec.comparisons.assign(pool_size * pool_size, 0);
    for (std::size_t l = 0; l < pool_size; ++l) {
        for (std::size_t j = 0; j < pool_size; ++j) {
            double sum_l = 0.0, sum_j = 0.0;
            std::size_t count = 0;
            for (std::size_t b = 0; b < B; ++b) {
                if (in_pool_bag[b].test(l) || in_pool_bag[b].test(j)) continue;
                sum_l += fraction(b, l);
                sum_j += fraction(b, j);
                ++count;
            }
            const bool a = count == 0 || sum_l / static_cast<double>(count) >= sum_j / static_cast<double>(count);
            rec.comparisons[l * pool_size + j] = a ? 1 : 0;
        }
    }
    rec.unit_diagonal = true;
    rec.tournament = true;
    rec.row_sums.assign(pool_size, 0);
    for (std::size_t l = 0; l < pool_size; ++l) {
        if (!rec.at(l, l)) rec.unit_diagonal = false;
        for (std::size_t j = 0; j < pool_size; ++j) {
            rec.row_sums[l] += rec.at(l, j) ? 1 : 0;
            if (!rec.at(l, j) && !rec.at(j, l)) rec.tournament = false;
        }
    }
    const double threshold = static_cast<double>(pool_size) * alpha - 1.0;
    for (std::size_t l = 0; l < pool_size; ++l)
        if (static_cast<double>(rec.row_sums[l]) <= threshold) rec.strange_set.push_back(l);
    rec.bound = 2.0 * alpha * static_cast<double>(pool_size);
    rec.bound_holds = static_cast<double>(rec.strange_set.size()) <= rec.bound;
    rec.held_score = static_cast<double>(rec.row_sums[n]) / static_cast<double>(pool_size);
    return rec;
}

} // namespace csforest
