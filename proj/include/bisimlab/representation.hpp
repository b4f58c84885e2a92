#pragma once

#include "bisimlab/mdp.hpp"
#include "bisimlab/metrics.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace bisim {

enum class DistanceKind { mico, simsr };
enum class LossKind { squared, huber };

DistanceKind distance_kind_from_string(const std::string& name);
LossKind loss_kind_from_string(const std::string& name);

// Cosine clip bounds inside the angular distance; gradients vanish outside.
inline constexpr double kCosClipLo = 0.0001;
inline constexpr double kCosClipHi = 0.9999;

// (||x|| + ||y||)/2 + beta * atan2(sqrt(1 - cos^2), cos), cosine clipped.
// The clip keeps self-distance strictly positive.
double distance_mico(const std::vector<double>& x, const std::vector<double>& y, double beta);

// 1 - cosine(x, y), range [0, 2].
double distance_simsr(const std::vector<double>& x, const std::vector<double>& y);

struct EmbeddingModel {
    int n_states = 0;
    int n_actions = 0;
    int embed_dim = 0;
    std::vector<double> phi;          // [state][embed_dim]
    std::vector<double> psi_weights;  // [(embed_dim + n_actions)][embed_dim]
    std::vector<double> psi_bias;     // [embed_dim]
    std::array<double, 2> raw_c{0.0, 0.0};  // softmax -> (reward weight, next-state weight)
    bool normalize_outputs = false;         // SimSR mode: phi rows and psi outputs on the unit sphere

    // Entries uniform in [-0.1, 0.1], phi rows normalized in SimSR mode,
    // psi bias zero, raw_c = (0,0) so the coefficient starts at 0.5.
    static EmbeddingModel init(int n_states, int n_actions, int embed_dim, bool normalize_outputs,
                               Rng& rng);
};

// softmax(raw_c): (reward_weight, next_weight) = (1-c, c) of the target.
std::pair<double, double> coefficient(const EmbeddingModel& model);

std::vector<double> encode_state(const EmbeddingModel& model, int s);
std::vector<double> encode_state_action(const EmbeddingModel& model, int s, int a);

struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
};

struct TrainConfig {
    DistanceKind distance_kind = DistanceKind::simsr;
    double beta = 0.1;  // MICo angle weight
    int batch_size = 64;
    double learning_rate = 1e-3;
    double c_learning_rate = 1e-4;
    int steps = 20000;
    uint64_t seed = 0;
    LossKind loss_kind = LossKind::squared;  // huber uses threshold 1.0
    int c_record_interval = 250;
    int buffer_capacity = 100000;  // FIFO transition buffer
};

// B x B pairwise matrices over a batch paired with itself (diagonal included),
// row-major. These are the two halves of the loss; each treats the other as a
// constant, which is what the finite-difference tests rely on.
std::vector<double> pairwise_target(const EmbeddingModel& model, const std::vector<Transition>& batch,
                                    const TrainConfig& config);
std::vector<double> pairwise_prediction(const EmbeddingModel& model,
                                        const std::vector<Transition>& batch,
                                        const TrainConfig& config);
double reduce_loss(const std::vector<double>& prediction, const std::vector<double>& target,
                   LossKind kind);

// Gradient holder for the encoder update. There is deliberately no raw_c
// entry: the coefficient is frozen inside the target.
struct EncoderGradients {
    std::vector<double> phi;          // same shape as model.phi
    std::vector<double> psi_weights;  // same shape as model.psi_weights
    std::vector<double> psi_bias;
};

struct EncoderLossResult {
    double loss = 0.0;
    EncoderGradients grads;
};

// Loss over the B x B pairing with the target held constant (stop-gradient on
// c and on the next-state embeddings). Gradients land only in phi rows of
// batch states and in the psi parameters.
EncoderLossResult encoder_loss_and_grads(const EmbeddingModel& model,
                                         const std::vector<Transition>& batch,
                                         const TrainConfig& config);

struct CLossResult {
    double loss = 0.0;
    std::array<double, 2> raw_c_grad{0.0, 0.0};  // the only parameter that moves
};

// Same pairing with the prediction held constant; the target depends on c
// through the softmax and the gradient flows only into raw_c.
CLossResult c_loss_and_grad(const EmbeddingModel& model, const std::vector<Transition>& batch,
                            const TrainConfig& config);

struct TrainTrace {
    std::vector<double> encoder_losses;  // one entry per step
    std::vector<double> c_values;        // next-state weight, every c_record_interval steps
    std::vector<double> c_deltas;        // |c_k - c_{k-1}|, first entry against the initial c
    StateMetricTable final_distance_table;
};

// Algorithm loop: collect one transition per step into the FIFO buffer,
// sample a batch uniformly with replacement, take a plain gradient step on
// the encoder and then on raw_c. The collection state is drawn uniformly each
// step so absorbing states cannot starve coverage. Deterministic per seed.
TrainTrace train(EmbeddingModel& model, const TabularMdp& mdp, const PolicyTable& policy,
                 const TrainConfig& config);

struct AssumptionReport {
    bool satisfied = false;
    double max_tail_delta = 0.0;
    double final_c = 0.0;
    int window = 0;
    double epsilon = 0.0;
};

// Checks the recorded c tail: all consecutive deltas among the last `window`
// records must stay within epsilon. Throws if the trace holds fewer records.
AssumptionReport monitor_c(const TrainTrace& trace, double epsilon, int window);

// Pairwise distance table of the current state embeddings.
StateMetricTable learned_distance_table(const EmbeddingModel& model, const TrainConfig& config);

}  // namespace bisim
