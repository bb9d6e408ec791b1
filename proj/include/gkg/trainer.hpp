// LoRA+ training: the split-rate update rule, per-stage loops over a
// seed-deterministic shuffle, the three-stage curriculum with merged
// checkpoint handoff, and the experiment drivers (stage-order, data-scaling
// and learning-rate sweeps).
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gkg/checkpoint_io.hpp"
#include "gkg/corpus.hpp"
#include "gkg/harness.hpp"
#include "gkg/model.hpp"

namespace gkg {

enum class Schedule { Constant, LinearDecay };
enum class OptimizerKind { Sgd, Adam };

inline Schedule parse_schedule(std::string_view s) {
    if (s == "constant") return Schedule::Constant;
    if (s == "linear_decay") return Schedule::LinearDecay;
    throw UsageError("unknown schedule: '" + std::string(s) + "'");
}

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw UsageError("unknown optimizer: '" + std::string(s) + "'");
}

struct LoraPlusConfig {
    double eta_a = 4e-4;
    std::optional<double> eta_b;  // explicit rate; otherwise lambda * eta_a
    double lambda = 10.0;
    int batch_size = 8;
    std::optional<double> grad_clip = 1.0;  // global norm; nullopt disables
    Schedule schedule = Schedule::Constant;
    int epochs_per_stage = 1;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    double resolved_eta_b() const { return eta_b ? *eta_b : lambda * eta_a; }

    void validate() const {
        if (eta_a <= 0.0 || resolved_eta_b() <= 0.0) throw UsageError("learning rates must be positive");
        if (resolved_eta_b() < eta_a)
            throw UsageError("eta_b must be >= eta_a (LoRA+ regime)");
        if (batch_size < 1) throw UsageError("batch_size must be positive");
        if (epochs_per_stage < 0) throw UsageError("epochs_per_stage must be non-negative");
        if (grad_clip && *grad_clip <= 0.0) throw UsageError("grad_clip must be positive");
    }
};

// Scales the whole gradient map so its global norm is at most `clip`.
template <class S>
void clip_gradients(std::map<std::string, Mat<S>>& grads, double clip) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) sq += squared_norm(g);
    double norm = std::sqrt(sq);
    if (norm <= clip || norm == 0.0) return;
    S scale = static_cast<S>(clip / norm);
    for (auto& [name, g] : grads)
        for (auto& v : g.data) v *= scale;
}

// The split-rate SGD update: A -= eta_a G_A, B -= eta_b G_B, elementwise,
// after optional global-norm clipping. Base weights are never touched.
template <class S>
void lora_plus_step(Checkpoint<S>& ckpt, std::map<std::string, Mat<S>> grads, double eta_a_t,
                    double eta_b_t, std::optional<double> grad_clip = std::nullopt) {
    if (eta_a_t < 0.0 || eta_b_t < 0.0) throw UsageError("learning rates must be non-negative");
    if (grad_clip) clip_gradients(grads, *grad_clip);
    for (const auto& [name, g] : grads) {
        bool is_a = name.ends_with(".lora_a");
        if (!is_a && !name.ends_with(".lora_b"))
            throw std::runtime_error("lora_plus_step: gradient for non-adapter tensor " + name);
        Mat<S>& factor = ckpt.tensor_mut(name);
        if (!factor.same_shape(g))
            throw std::runtime_error("lora_plus_step: shape mismatch for " + name);
        const S eta = static_cast<S>(is_a ? eta_a_t : eta_b_t);
        for (std::size_t i = 0; i < factor.data.size(); ++i) factor.data[i] -= eta * g.data[i];
    }
}

// Adam moments per factor, still with the split rates. Config option for
// runs where plain SGD converges too slowly; the Eq.-style exactness
// invariants apply to the SGD path.
template <class S>
struct AdamState {
    std::map<std::string, Mat<S>> m, v;
    long long t = 0;
};

template <class S>
void adam_step(Checkpoint<S>& ckpt, std::map<std::string, Mat<S>> grads, double eta_a_t,
               double eta_b_t, const LoraPlusConfig& cfg, AdamState<S>& state) {
    if (cfg.grad_clip) clip_gradients(grads, *cfg.grad_clip);
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
    for (const auto& [name, g] : grads) {
        Mat<S>& factor = ckpt.tensor_mut(name);
        Mat<S>& m = state.m[name];
        Mat<S>& v = state.v[name];
        if (m.size() == 0) m = Mat<S>(g.rows, g.cols);
        if (v.size() == 0) v = Mat<S>(g.rows, g.cols);
        const double eta = name.ends_with(".lora_a") ? eta_a_t : eta_b_t;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            double gi = static_cast<double>(g.data[i]);
            double mi = cfg.adam_beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg.adam_beta1) * gi;
            double vi = cfg.adam_beta2 * static_cast<double>(v.data[i]) + (1.0 - cfg.adam_beta2) * gi * gi;
            m.data[i] = static_cast<S>(mi);
            v.data[i] = static_cast<S>(vi);
            double update = eta * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.adam_eps);
            factor.data[i] -= static_cast<S>(update);
        }
    }
}

struct TrainStepLog {
    long long step = 0;
    std::string stage;
    double loss = 0.0;
    double eta_a = 0.0;
    double eta_b = 0.0;
};

struct TrainLog {
    std::vector<TrainStepLog> steps;
    double seconds = 0.0;
};

// One stage: epochs_per_stage passes over a seed-deterministic shuffle.
// The logged loss at each step is measured before that step's update, so
// the first entry is the untrained start's loss on the first batch.
template <class S>
std::pair<Checkpoint<S>, TrainLog> train_stage(const Checkpoint<S>& start,
                                               const std::vector<GkgRecord>& records,
                                               const LoraPlusConfig& cfg,
                                               const std::string& stage_label) {
    if (records.empty())
        throw std::runtime_error("train_stage " + stage_label + ": no training records");
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();

    Checkpoint<S> ckpt = start;
    ckpt.stage_label = stage_label;
    ckpt.parent_hash = checkpoint_hash(start);

    std::vector<Encoded> encoded;
    encoded.reserve(records.size());
    for (const auto& rec : records) {
        Encoded ex = encode_example(render_prompt(rec), rec.output, ckpt.config.max_seq_len);
        bool any_target = false;
        for (auto m : ex.target_mask) any_target |= m != 0;
        if (!any_target)
            throw std::runtime_error("train_stage " + stage_label + ": record " + rec.id +
                                     " does not fit in max_seq_len " +
                                     std::to_string(ckpt.config.max_seq_len));
        encoded.push_back(std::move(ex));
    }

    const std::size_t n = encoded.size();
    const std::size_t batches_per_epoch =
        (n + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
    const long long total_steps =
        static_cast<long long>(cfg.epochs_per_stage) * static_cast<long long>(batches_per_epoch);

    TrainLog log;
    AdamState<S> adam;
    long long step = 0;
    for (int epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        KeyedRng rng(cfg.seed, "epoch:" + stage_label + ":" + std::to_string(epoch));
        rng.shuffle(order);
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            Batch batch;
            for (std::size_t i = b * cfg.batch_size; i < std::min(n, (b + 1) * static_cast<std::size_t>(cfg.batch_size)); ++i)
                batch.examples.push_back(encoded[order[i]]);

            std::map<std::string, Mat<S>> grads;
            double batch_loss = gradients(ckpt, batch, grads);

            double factor = 1.0;
            if (cfg.schedule == Schedule::LinearDecay)
                factor = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
            const double eta_a_t = cfg.eta_a * factor;
            const double eta_b_t = cfg.resolved_eta_b() * factor;

            if (cfg.optimizer == OptimizerKind::Adam)
                adam_step(ckpt, std::move(grads), eta_a_t, eta_b_t, cfg, adam);
            else
                lora_plus_step(ckpt, std::move(grads), eta_a_t, eta_b_t, cfg.grad_clip);

            log.steps.push_back({step, stage_label, batch_loss, eta_a_t, eta_b_t});
            step += 1;
        }
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(ckpt), std::move(log)};
}

// ---------------------------------------------------------------------------
// Curriculum.

struct CurriculumStage {
    std::string name;            // descriptive ("KG empowerment")
    std::set<GraphFamily> families;
    bool include_counter = false;
    std::string output_label;    // checkpoint label ("G-Micro")
};

struct CurriculumPlan {
    std::vector<CurriculumStage> stages;

    void validate() const {
        if (stages.empty()) throw UsageError("curriculum plan has no stages");
        for (const auto& s : stages) {
            if (s.families.empty())
                throw UsageError("curriculum stage '" + s.name + "' covers no graph family");
            if (s.output_label.empty())
                throw UsageError("curriculum stage '" + s.name + "' has no output label");
        }
    }

    // KG empowerment -> EKG enhancement -> CKG generalization (+ counter).
    static CurriculumPlan default_plan() {
        CurriculumPlan plan;
        plan.stages = {
            {"KG empowerment", {GraphFamily::KG}, false, "G-Micro"},
            {"EKG enhancement", {GraphFamily::EKG}, false, "G-Mid"},
            {"CKG generalization", {GraphFamily::CKG}, true, "GKG-LLM"},
        };
        return plan;
    }

    // Single stage over all families plus the counter task.
    static CurriculumPlan integrated_sft() {
        CurriculumPlan plan;
        plan.stages = {{"Integrated SFT",
                        {GraphFamily::KG, GraphFamily::EKG, GraphFamily::CKG},
                        true,
                        "Integrated-SFT"}};
        return plan;
    }

    // "K-E-C"-style permutation; the counter task rides the final stage.
    // The canonical order keeps the canonical labels.
    static CurriculumPlan from_order(const std::string& order) {
        if (order == "K-E-C") return default_plan();
        CurriculumPlan plan;
        std::vector<char> letters;
        for (char c : order)
            if (c != '-') letters.push_back(c);
        if (letters.size() != 3) throw UsageError("stage order must name three stages, e.g. K-E-C");
        std::set<char> seen;
        for (std::size_t i = 0; i < letters.size(); ++i) {
            GraphFamily family;
            switch (letters[i]) {
                case 'K': family = GraphFamily::KG; break;
                case 'E': family = GraphFamily::EKG; break;
                case 'C': family = GraphFamily::CKG; break;
                default:
                    throw UsageError(std::string("unknown stage letter '") + letters[i] + "'");
            }
            if (!seen.insert(letters[i]).second)
                throw UsageError("stage order repeats '" + std::string(1, letters[i]) + "'");
            CurriculumStage stage;
            stage.name = std::string(1, letters[i]) + " stage " + std::to_string(i + 1);
            stage.families = {family};
            stage.include_counter = i + 1 == letters.size();
            stage.output_label = "stage" + std::to_string(i + 1) + "-" + letters[i];
            plan.stages.push_back(std::move(stage));
        }
        return plan;
    }
};

template <class S>
struct CurriculumResult {
    std::vector<Checkpoint<S>> checkpoints;  // merged artifact per stage
    std::vector<TrainLog> logs;
};

// Sequential stages; stage n+1 starts from stage n's merged checkpoint.
// Held-out record ids must never appear in any stage's training set;
// asserted on every run.
template <class S>
CurriculumResult<S> run_curriculum(const Checkpoint<S>& base, const CurriculumPlan& plan,
                                   const Corpus& corpus, const LoraPlusConfig& cfg) {
    plan.validate();
    cfg.validate();
    const std::set<std::string> held_out = corpus.held_out_test_ids();

    CurriculumResult<S> result;
    const Checkpoint<S>* current = &base;
    for (const auto& stage : plan.stages) {
        std::set<GraphFamily> families = stage.families;
        if (stage.include_counter) families.insert(GraphFamily::Counter);
        std::vector<GkgRecord> records = corpus.train_records(families);
        if (records.empty())
            throw std::runtime_error("curriculum stage '" + stage.name +
                                     "' matches no training records");
        for (const auto& rec : records)
            if (held_out.count(rec.id))
                throw std::runtime_error("curriculum stage '" + stage.name +
                                         "' would train on held-out record " + rec.id);

        auto [trained, log] = train_stage(*current, records, cfg, stage.output_label);
        Checkpoint<S> merged = merge_adapters(trained, cfg.seed);
        result.checkpoints.push_back(std::move(merged));
        result.logs.push_back(std::move(log));
        current = &result.checkpoints.back();
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sweep drivers. Cells share nothing but the immutable base checkpoint and
// corpus; results are keyed by permutation / fraction / grid cell.

inline const std::vector<std::string>& stage_order_labels() {
    static const std::vector<std::string> labels = {"K-E-C", "K-C-E", "E-K-C",
                                                    "E-C-K", "C-K-E", "C-E-K"};
    return labels;
}

template <class S>
std::map<std::string, MetricReport> sweep_order(const Checkpoint<S>& base, const Corpus& corpus,
                                                const LoraPlusConfig& cfg,
                                                PromptStrategy strategy,
                                                const EvalOptions& options) {
    std::map<std::string, MetricReport> out;
    for (const auto& label : stage_order_labels()) {
        auto result = run_curriculum(base, CurriculumPlan::from_order(label), corpus, cfg);
        EvalRun run = evaluate(result.checkpoints.back(), corpus, strategy, options);
        out[label] = std::move(run.report);
    }
    return out;
}

inline std::vector<Fraction> default_scale_fractions() {
    return {Fraction(1, 10), Fraction(2, 10), Fraction(4, 10),
            Fraction(6, 10), Fraction(8, 10), Fraction(1, 1)};
}

// Subsamples the train side per dataset, keeps test intact.
inline Corpus scaled_corpus(const Corpus& corpus, Fraction p, std::uint64_t seed) {
    Corpus out = corpus;
    std::vector<GkgRecord> all_train;
    for (const auto& entry : corpus.manifest.entries) {
        auto it = corpus.train.find(entry.descriptor.key());
        if (it == corpus.train.end()) continue;
        all_train.insert(all_train.end(), it->second.begin(), it->second.end());
    }
    std::vector<GkgRecord> sampled = sample_fraction(all_train, p, seed);
    for (auto& [key, records] : out.train) records.clear();
    for (auto& rec : sampled) out.train[rec.dataset_key()].push_back(std::move(rec));
    return out;
}

template <class S>
std::map<std::string, MetricReport> sweep_scale(const Checkpoint<S>& base, const Corpus& corpus,
                                                const std::vector<Fraction>& fractions,
                                                const LoraPlusConfig& cfg,
                                                PromptStrategy strategy,
                                                const EvalOptions& options) {
    std::map<std::string, MetricReport> out;
    for (const auto& p : fractions) {
        if (p.is_zero() || p.num > p.den)
            throw UsageError("scale fraction must be in (0,1], got " + p.str());
        Corpus scaled = p.is_one() ? corpus : scaled_corpus(corpus, p, cfg.seed);
        auto result = run_curriculum(base, CurriculumPlan::default_plan(), scaled, cfg);
        EvalRun run = evaluate(result.checkpoints.back(), corpus, strategy, options);
        out[p.str()] = std::move(run.report);
    }
    return out;
}

// Rate grid: columns are eta_A values, rows are eta_B expressed as a
// multiple of eta_A (the heatmap layout).
struct EtaGrid {
    std::vector<double> eta_a_values;
    std::vector<double> lambda_values;

    // Axes covering every cell the hyperparameter study names: the best
    // cell (4e-4, x10 = 4e-3), the 2e-4/8e-3 (x40) point, and the 5e-5
    // column that floors the score.
    static EtaGrid reference() {
        return {{5e-5, 1e-4, 2e-4, 4e-4}, {1.0, 2.0, 5.0, 10.0, 20.0, 40.0}};
    }

    void validate() const {
        if (eta_a_values.empty() || lambda_values.empty()) throw UsageError("eta grid is empty");
        for (double v : eta_a_values)
            if (v <= 0.0) throw UsageError("eta_a grid values must be positive");
        for (double v : lambda_values)
            if (v < 1.0) throw UsageError("lambda grid values must be >= 1 (LoRA+ regime)");
    }
};

struct EtaSweepResult {
    EtaGrid grid;
    // scores[row][col] = overall score at (lambda_values[row], eta_a_values[col])
    std::vector<std::vector<double>> scores;
};

template <class S>
EtaSweepResult sweep_eta(const Checkpoint<S>& base, const Corpus& corpus, const EtaGrid& grid,
                         const LoraPlusConfig& cfg, PromptStrategy strategy,
                         const EvalOptions& options) {
    grid.validate();
    EtaSweepResult result;
    result.grid = grid;
    result.scores.assign(grid.lambda_values.size(),
                         std::vector<double>(grid.eta_a_values.size(), 0.0));
    for (std::size_t r = 0; r < grid.lambda_values.size(); ++r) {
        for (std::size_t c = 0; c < grid.eta_a_values.size(); ++c) {
            LoraPlusConfig cell = cfg;
            cell.eta_a = grid.eta_a_values[c];
            cell.lambda = grid.lambda_values[r];
            cell.eta_b.reset();
            auto run_result = run_curriculum(base, CurriculumPlan::default_plan(), corpus, cell);
            EvalRun run = evaluate(run_result.checkpoints.back(), corpus, strategy, options);
            result.scores[r][c] = run.report.overall;
        }
    }
    return result;
}

}  // namespace gkg
