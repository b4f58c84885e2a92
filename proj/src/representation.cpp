#include "bisimlab/representation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace bisim {

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

void require_nonzero(double n, const char* where) {
    if (n == 0.0) throw std::invalid_argument(std::string(where) + ": zero vector");
}

std::vector<double> normalized(const std::vector<double>& v, const char* where) {
    double n = norm2(v);
    require_nonzero(n, where);
    std::vector<double> out(v);
    for (double& x : out) x /= n;
    return out;
}

// d/dv of L given d/d(v/||v||): (g - (g . vhat) vhat) / ||v||
void normalize_backward(const std::vector<double>& v, const std::vector<double>& g,
                        std::vector<double>& out) {
    double n = norm2(v);
    double gn = 0.0;
    for (size_t k = 0; k < v.size(); ++k) gn += g[k] * v[k];
    gn /= n * n;
    out.resize(v.size());
    for (size_t k = 0; k < v.size(); ++k) out[k] = (g[k] - gn * v[k]) / n;
}

double clipped_angle(double cosine) {
    double c = std::clamp(cosine, kCosClipLo, kCosClipHi);
    return std::atan2(std::sqrt(1.0 - c * c), c);
}

double distance(DistanceKind kind, double beta, const std::vector<double>& x,
                const std::vector<double>& y) {
    return kind == DistanceKind::mico ? distance_mico(x, y, beta) : distance_simsr(x, y);
}

// Accumulates w * dD(x,y)/dx into gx and w * dD(x,y)/dy into gy.
void distance_backward(DistanceKind kind, double beta, const std::vector<double>& x,
                       const std::vector<double>& y, double w, std::vector<double>& gx,
                       std::vector<double>& gy) {
    const size_t m = x.size();
    double nx = norm2(x), ny = norm2(y);
    require_nonzero(nx, "distance");
    require_nonzero(ny, "distance");
    double cosine = dot(x, y) / (nx * ny);

    // d cos / dx = (yhat - cos * xhat) / ||x||, and symmetrically for y
    double dcos;  // dD/dcos
    if (kind == DistanceKind::simsr) {
        dcos = -1.0;
    } else {
        bool inside = cosine > kCosClipLo && cosine < kCosClipHi;
        dcos = inside ? -beta / std::sqrt(1.0 - cosine * cosine) : 0.0;
    }
    for (size_t k = 0; k < m; ++k) {
        double xhat = x[k] / nx, yhat = y[k] / ny;
        double dx = dcos * (yhat - cosine * xhat) / nx;
        double dy = dcos * (xhat - cosine * yhat) / ny;
        if (kind == DistanceKind::mico) {
            dx += 0.5 * xhat;
            dy += 0.5 * yhat;
        }
        gx[k] += w * dx;
        gy[k] += w * dy;
    }
}

double loss_term(double e, LossKind kind) {
    if (kind == LossKind::squared) return e * e;
    double a = std::abs(e);
    return a <= 1.0 ? 0.5 * e * e : a - 0.5;  // huber, threshold 1.0
}

double loss_term_grad(double e, LossKind kind) {
    if (kind == LossKind::squared) return 2.0 * e;
    return std::clamp(e, -1.0, 1.0);
}

struct EncodedBatch {
    std::vector<std::vector<double>> phi_raw;   // phi rows of batch states
    std::vector<std::vector<double>> phi_used;  // normalized in SimSR mode
    std::vector<std::vector<double>> z;         // psi pre-normalization
    std::vector<std::vector<double>> x;         // psi outputs fed to the distance
};

EncodedBatch encode_batch(const EmbeddingModel& model, const std::vector<Transition>& batch) {
    const int m = model.embed_dim;
    EncodedBatch enc;
    const size_t B = batch.size();
    enc.phi_raw.resize(B);
    enc.phi_used.resize(B);
    enc.z.resize(B);
    enc.x.resize(B);
    for (size_t k = 0; k < B; ++k) {
        const Transition& t = batch[k];
        if (t.s < 0 || t.s >= model.n_states || t.a < 0 || t.a >= model.n_actions)
            throw std::out_of_range("encode: batch index out of range");
        enc.phi_raw[k].assign(model.phi.begin() + static_cast<size_t>(t.s) * m,
                              model.phi.begin() + static_cast<size_t>(t.s + 1) * m);
        enc.phi_used[k] =
            model.normalize_outputs ? normalized(enc.phi_raw[k], "encode_state") : enc.phi_raw[k];
        std::vector<double>& z = enc.z[k];
        z.assign(model.psi_bias.begin(), model.psi_bias.end());
        for (int i = 0; i < m; ++i) {
            double u = enc.phi_used[k][i];
            if (u == 0.0) continue;
            const double* wrow = &model.psi_weights[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) z[j] += u * wrow[j];
        }
        const double* arow = &model.psi_weights[static_cast<size_t>(m + t.a) * m];
        for (int j = 0; j < m; ++j) z[j] += arow[j];
        enc.x[k] = model.normalize_outputs ? normalized(z, "encode_state_action") : z;
    }
    return enc;
}

}  // namespace

DistanceKind distance_kind_from_string(const std::string& name) {
    if (name == "mico") return DistanceKind::mico;
    if (name == "simsr") return DistanceKind::simsr;
    throw std::invalid_argument("unknown distance: " + name);
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "squared") return LossKind::squared;
    if (name == "huber") return LossKind::huber;
    throw std::invalid_argument("unknown loss: " + name);
}

double distance_mico(const std::vector<double>& x, const std::vector<double>& y, double beta) {
    if (x.size() != y.size()) throw std::invalid_argument("distance_mico: dimension mismatch");
    if (beta < 0.0) throw std::invalid_argument("distance_mico: beta must be nonnegative");
    double nx = norm2(x), ny = norm2(y);
    require_nonzero(nx, "distance_mico");
    require_nonzero(ny, "distance_mico");
    double cosine = dot(x, y) / (nx * ny);
    return 0.5 * (nx + ny) + beta * clipped_angle(cosine);
}

double distance_simsr(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("distance_simsr: dimension mismatch");
    double nx = norm2(x), ny = norm2(y);
    require_nonzero(nx, "distance_simsr");
    require_nonzero(ny, "distance_simsr");
    return 1.0 - dot(x, y) / (nx * ny);
}

EmbeddingModel EmbeddingModel::init(int n_states, int n_actions, int embed_dim,
                                    bool normalize_outputs, Rng& rng) {
    if (embed_dim < 2) throw std::invalid_argument("EmbeddingModel: embed_dim must be >= 2");
    EmbeddingModel model;
    model.n_states = n_states;
    model.n_actions = n_actions;
    model.embed_dim = embed_dim;
    model.normalize_outputs = normalize_outputs;
    model.phi.resize(static_cast<size_t>(n_states) * embed_dim);
    for (double& x : model.phi) x = rng.uniform(-0.1, 0.1);
    if (normalize_outputs) {
        for (int s = 0; s < n_states; ++s) {
            double* row = &model.phi[static_cast<size_t>(s) * embed_dim];
            double n = 0.0;
            for (int k = 0; k < embed_dim; ++k) n += row[k] * row[k];
            n = std::sqrt(n);
            require_nonzero(n, "EmbeddingModel::init");
            for (int k = 0; k < embed_dim; ++k) row[k] /= n;
        }
    }
    model.psi_weights.resize(static_cast<size_t>(embed_dim + n_actions) * embed_dim);
    for (double& x : model.psi_weights) x = rng.uniform(-0.1, 0.1);
    model.psi_bias.assign(embed_dim, 0.0);
    model.raw_c = {0.0, 0.0};
    return model;
}

std::pair<double, double> coefficient(const EmbeddingModel& model) {
    double m = std::max(model.raw_c[0], model.raw_c[1]);
    double e0 = std::exp(model.raw_c[0] - m);
    double e1 = std::exp(model.raw_c[1] - m);
    double z = e0 + e1;
    return {e0 / z, e1 / z};
}

std::vector<double> encode_state(const EmbeddingModel& model, int s) {
    if (s < 0 || s >= model.n_states) throw std::out_of_range("encode_state: index out of range");
    std::vector<double> row(model.phi.begin() + static_cast<size_t>(s) * model.embed_dim,
                            model.phi.begin() + static_cast<size_t>(s + 1) * model.embed_dim);
    return model.normalize_outputs ? normalized(row, "encode_state") : row;
}

std::vector<double> encode_state_action(const EmbeddingModel& model, int s, int a) {
    if (a < 0 || a >= model.n_actions)
        throw std::out_of_range("encode_state_action: action index out of range");
    std::vector<Transition> one{{s, a, 0.0, 0}};
    return encode_batch(model, one).x[0];
}

std::vector<double> pairwise_target(const EmbeddingModel& model, const std::vector<Transition>& batch,
                                    const TrainConfig& config) {
    const size_t B = batch.size();
    auto [reward_w, next_w] = coefficient(model);
    std::vector<std::vector<double>> next_embed(B);
    for (size_t k = 0; k < B; ++k) next_embed[k] = encode_state(model, batch[k].s_next);
    std::vector<double> target(B * B);
    for (size_t i = 0; i < B; ++i) {
        for (size_t j = i; j < B; ++j) {
            double v = reward_w * std::abs(batch[i].r - batch[j].r) +
                       next_w * distance(config.distance_kind, config.beta, next_embed[i], next_embed[j]);
            target[i * B + j] = v;
            target[j * B + i] = v;
        }
    }
    return target;
}

std::vector<double> pairwise_prediction(const EmbeddingModel& model,
                                        const std::vector<Transition>& batch,
                                        const TrainConfig& config) {
    const size_t B = batch.size();
    EncodedBatch enc = encode_batch(model, batch);
    std::vector<double> pred(B * B);
    for (size_t i = 0; i < B; ++i) {
        for (size_t j = i; j < B; ++j) {
            double v = distance(config.distance_kind, config.beta, enc.x[i], enc.x[j]);
            pred[i * B + j] = v;
            pred[j * B + i] = v;
        }
    }
    return pred;
}

double reduce_loss(const std::vector<double>& prediction, const std::vector<double>& target,
                   LossKind kind) {
    double acc = 0.0;
    for (size_t k = 0; k < prediction.size(); ++k) acc += loss_term(target[k] - prediction[k], kind);
    return acc / static_cast<double>(prediction.size());
}

EncoderLossResult encoder_loss_and_grads(const EmbeddingModel& model,
                                         const std::vector<Transition>& batch,
                                         const TrainConfig& config) {
    const size_t B = batch.size();
    if (B < 2) throw std::invalid_argument("encoder_loss_and_grads: batch size must be >= 2");
    const int m = model.embed_dim;

    EncodedBatch enc = encode_batch(model, batch);
    std::vector<double> target = pairwise_target(model, batch, config);

    EncoderLossResult out;
    out.grads.phi.assign(model.phi.size(), 0.0);
    out.grads.psi_weights.assign(model.psi_weights.size(), 0.0);
    out.grads.psi_bias.assign(model.psi_bias.size(), 0.0);

    // dL/dx accumulated per batch element across all B^2 pairs
    std::vector<std::vector<double>> gx(B, std::vector<double>(m, 0.0));
    double acc = 0.0;
    const double inv = 1.0 / static_cast<double>(B * B);
    for (size_t i = 0; i < B; ++i) {
        for (size_t j = 0; j < B; ++j) {
            double p = distance(config.distance_kind, config.beta, enc.x[i], enc.x[j]);
            double e = target[i * B + j] - p;
            acc += loss_term(e, config.loss_kind);
            double w = -loss_term_grad(e, config.loss_kind) * inv;  // dL/dp
            distance_backward(config.distance_kind, config.beta, enc.x[i], enc.x[j], w, gx[i], gx[j]);
        }
    }
    out.loss = acc * inv;

    std::vector<double> gz, gphi;
    for (size_t k = 0; k < B; ++k) {
        if (model.normalize_outputs) {
            normalize_backward(enc.z[k], gx[k], gz);
        } else {
            gz = gx[k];
        }
        const Transition& t = batch[k];
        // psi: z = [phi_used ; onehot(a)]^T W + b
        for (int i = 0; i < m; ++i) {
            double u = enc.phi_used[k][i];
            if (u == 0.0) continue;
            double* wg = &out.grads.psi_weights[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) wg[j] += u * gz[j];
        }
        double* ag = &out.grads.psi_weights[static_cast<size_t>(m + t.a) * m];
        for (int j = 0; j < m; ++j) {
            ag[j] += gz[j];
            out.grads.psi_bias[j] += gz[j];
        }
        // back into the phi row through W (and the normalization, in SimSR mode)
        std::vector<double> gu(m, 0.0);
        for (int i = 0; i < m; ++i) {
            const double* wrow = &model.psi_weights[static_cast<size_t>(i) * m];
            double s = 0.0;
            for (int j = 0; j < m; ++j) s += wrow[j] * gz[j];
            gu[i] = s;
        }
        double* prow = &out.grads.phi[static_cast<size_t>(t.s) * m];
        if (model.normalize_outputs) {
            normalize_backward(enc.phi_raw[k], gu, gphi);
            for (int i = 0; i < m; ++i) prow[i] += gphi[i];
        } else {
            for (int i = 0; i < m; ++i) prow[i] += gu[i];
        }
    }
    return out;
}

CLossResult c_loss_and_grad(const EmbeddingModel& model, const std::vector<Transition>& batch,
                            const TrainConfig& config) {
    const size_t B = batch.size();
    if (B < 2) throw std::invalid_argument("c_loss_and_grad: batch size must be >= 2");

    std::vector<double> pred = pairwise_prediction(model, batch, config);
    std::vector<std::vector<double>> next_embed(B);
    for (size_t k = 0; k < B; ++k) next_embed[k] = encode_state(model, batch[k].s_next);

    auto [reward_w, next_w] = coefficient(model);
    double acc = 0.0, g_reward = 0.0, g_next = 0.0;
    const double inv = 1.0 / static_cast<double>(B * B);
    for (size_t i = 0; i < B; ++i) {
        for (size_t j = 0; j < B; ++j) {
            double rd = std::abs(batch[i].r - batch[j].r);
            double nd = distance(config.distance_kind, config.beta, next_embed[i], next_embed[j]);
            double e = reward_w * rd + next_w * nd - pred[i * B + j];
            acc += loss_term(e, config.loss_kind);
            double w = loss_term_grad(e, config.loss_kind) * inv;  // dL/dtarget
            g_reward += w * rd;
            g_next += w * nd;
        }
    }

    CLossResult out;
    out.loss = acc * inv;
    // softmax jacobian: d c_b / d raw_a = c_b (delta_ab - c_a)
    double mix = reward_w * g_reward + next_w * g_next;
    out.raw_c_grad[0] = reward_w * (g_reward - mix);
    out.raw_c_grad[1] = next_w * (g_next - mix);
    return out;
}

StateMetricTable learned_distance_table(const EmbeddingModel& model, const TrainConfig& config) {
    StateMetricTable table(model.n_states);
    std::vector<std::vector<double>> embed(model.n_states);
    for (int s = 0; s < model.n_states; ++s) embed[s] = encode_state(model, s);
    for (int i = 0; i < model.n_states; ++i) {
        for (int j = i; j < model.n_states; ++j) {
            double v = distance(config.distance_kind, config.beta, embed[i], embed[j]);
            table.at(i, j) = v;
            table.at(j, i) = v;
        }
    }
    return table;
}

TrainTrace train(EmbeddingModel& model, const TabularMdp& mdp, const PolicyTable& policy,
                 const TrainConfig& config) {
    if (config.batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");
    if (config.learning_rate <= 0.0 || config.c_learning_rate < 0.0)
        throw std::invalid_argument("train: learning rates must be positive");
    if (config.c_record_interval <= 0) throw std::invalid_argument("train: c_record_interval must be positive");

    Rng rng(config.seed);
    std::deque<Transition> buffer;
    TrainTrace trace;
    double last_c = coefficient(model).second;

    const int m = model.embed_dim;
    std::vector<Transition> batch(config.batch_size);

    for (int step = 0; step < config.steps; ++step) {
        try {
            int s = rng.uniform_int(0, mdp.n_states - 1);
            Step tr = sample_transition(mdp, policy, rng, s);
            buffer.push_back({s, tr.action, tr.reward, tr.next_state});
            if (static_cast<int>(buffer.size()) > config.buffer_capacity) buffer.pop_front();

            for (int k = 0; k < config.batch_size; ++k)
                batch[k] = buffer[rng.uniform_int(0, static_cast<int>(buffer.size()) - 1)];

            EncoderLossResult enc = encoder_loss_and_grads(model, batch, config);
            for (size_t k = 0; k < model.phi.size(); ++k)
                model.phi[k] -= config.learning_rate * enc.grads.phi[k];
            for (size_t k = 0; k < model.psi_weights.size(); ++k)
                model.psi_weights[k] -= config.learning_rate * enc.grads.psi_weights[k];
            for (size_t k = 0; k < model.psi_bias.size(); ++k)
                model.psi_bias[k] -= config.learning_rate * enc.grads.psi_bias[k];
            if (model.normalize_outputs) {
                for (int s2 = 0; s2 < model.n_states; ++s2) {
                    double* row = &model.phi[static_cast<size_t>(s2) * m];
                    double n = 0.0;
                    for (int k = 0; k < m; ++k) n += row[k] * row[k];
                    n = std::sqrt(n);
                    require_nonzero(n, "train: phi row collapsed");
                    for (int k = 0; k < m; ++k) row[k] /= n;
                }
            }

            CLossResult cres = c_loss_and_grad(model, batch, config);
            model.raw_c[0] -= config.c_learning_rate * cres.raw_c_grad[0];
            model.raw_c[1] -= config.c_learning_rate * cres.raw_c_grad[1];

            trace.encoder_losses.push_back(enc.loss);
            if ((step + 1) % config.c_record_interval == 0) {
                double c = coefficient(model).second;
                trace.c_values.push_back(c);
                trace.c_deltas.push_back(std::abs(c - last_c));
                last_c = c;
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("train: step " + std::to_string(step) + ": " + e.what());
        }
    }

    trace.final_distance_table = learned_distance_table(model, config);
    return trace;
}

AssumptionReport monitor_c(const TrainTrace& trace, double epsilon, int window) {
    const int n = static_cast<int>(trace.c_values.size());
    if (window < 2) throw std::invalid_argument("monitor_c: window must hold at least two records");
    if (window > n) throw std::invalid_argument("monitor_c: window larger than trace");
    AssumptionReport report;
    report.window = window;
    report.epsilon = epsilon;
    report.final_c = trace.c_values.back();
    for (int k = n - window + 1; k < n; ++k)
        report.max_tail_delta = std::max(report.max_tail_delta,
                                         std::abs(trace.c_values[k] - trace.c_values[k - 1]));
    report.satisfied = report.max_tail_delta <= epsilon;
    return report;
}

}  // namespace bisim
