#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "customs/mathfn.hpp"
#include "customs/rng.hpp"

namespace customs {

struct Example {
    Eigen::VectorXd x;
    bool illicit = false;
    double revenue = 0.0;
};

struct TrainConfig {
    int hidden_dim = 16;
    int epochs = 10;
    int batch_size = 512;
    double learning_rate = 5e-3;
    double revenue_loss_weight = 0.3;
    uint64_t seed = 0;
};

// Shared ReLU encoder with a sigmoid fraud head and a softplus revenue head.
struct ModelParams {
    Eigen::MatrixXd enc_w;  // H x D
    Eigen::VectorXd enc_b;  // H
    Eigen::VectorXd cls_w;  // H
    double cls_b = 0.0;
    Eigen::VectorXd rev_w;  // H
    double rev_b = 0.0;
};

struct ModelSnapshot {
    int input_dim = 0;
    int hidden_dim = 0;
    bool constant_fallback = false;  // single-class training window
    ModelParams params;
};

struct Prediction {
    double fraud_score = 0.0;      // sigmoid of the fraud logit
    double fraud_logit = 0.0;
    double revenue_estimate = 0.0; // softplus of the revenue head
    Eigen::VectorXd embedding;     // post-ReLU hidden activations
};

struct TrainResult {
    ModelSnapshot model;
    // loss_trace[0] is the pre-training loss, then one entry per epoch.
    std::vector<double> loss_trace;
};

inline ModelParams zero_params(int input_dim, int hidden_dim) {
    ModelParams p;
    p.enc_w = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
    p.enc_b = Eigen::VectorXd::Zero(hidden_dim);
    p.cls_w = Eigen::VectorXd::Zero(hidden_dim);
    p.cls_b = 0.0;
    p.rev_w = Eigen::VectorXd::Zero(hidden_dim);
    p.rev_b = 0.0;
    return p;
}

inline ModelParams init_params(int input_dim, int hidden_dim, Rng& rng) {
    ModelParams p = zero_params(input_dim, hidden_dim);
    const double enc_scale = std::sqrt(2.0 / input_dim);
    for (int i = 0; i < hidden_dim; ++i)
        for (int j = 0; j < input_dim; ++j) p.enc_w(i, j) = enc_scale * rng.normal();
    const double head_scale = std::sqrt(1.0 / hidden_dim);
    for (int i = 0; i < hidden_dim; ++i) p.cls_w[i] = head_scale * rng.normal();
    for (int i = 0; i < hidden_dim; ++i) p.rev_w[i] = head_scale * rng.normal();
    return p;
}

inline Prediction predict(const ModelParams& p, const Eigen::VectorXd& x) {
    if (x.size() != p.enc_w.cols())
        throw std::invalid_argument("predict: feature dimension mismatch");
    Prediction out;
    out.embedding = (p.enc_w * x + p.enc_b).cwiseMax(0.0);
    out.fraud_logit = p.cls_w.dot(out.embedding) + p.cls_b;
    out.fraud_score = sigmoid(out.fraud_logit);
    out.revenue_estimate = softplus(p.rev_w.dot(out.embedding) + p.rev_b);
    return out;
}

inline Prediction predict(const ModelSnapshot& m, const Eigen::VectorXd& x) {
    return predict(m.params, x);
}

inline std::vector<Prediction> predict_batch(const ModelSnapshot& m,
                                             const std::vector<Example>& items) {
    std::vector<Prediction> out;
    out.reserve(items.size());
    for (const auto& e : items) out.push_back(predict(m.params, e.x));
    return out;
}

// Mean fraud BCE plus weighted squared error between log1p of predicted and
// observed seized revenue.
inline double mean_loss(const ModelParams& p, const std::vector<Example>& items,
                        double revenue_loss_weight) {
    if (items.empty()) throw std::invalid_argument("mean_loss: empty batch");
    double total = 0.0;
    for (const auto& e : items) {
        const Prediction pr = predict(p, e.x);
        const double bce = bce_from_logit(pr.fraud_logit, e.illicit ? 1.0 : 0.0);
        const double err = std::log1p(pr.revenue_estimate) - std::log1p(e.revenue);
        total += bce + revenue_loss_weight * err * err;
    }
    return total / static_cast<double>(items.size());
}

// Analytic gradient of mean_loss over the given batch indices.
inline ModelParams loss_gradients(const ModelParams& p, const std::vector<Example>& items,
                                  const std::vector<int>& batch, double revenue_loss_weight) {
    if (batch.empty()) throw std::invalid_argument("loss_gradients: empty batch");
    const int H = static_cast<int>(p.enc_w.rows());
    const int D = static_cast<int>(p.enc_w.cols());
    ModelParams g = zero_params(D, H);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (int idx : batch) {
        const Example& e = items[static_cast<std::size_t>(idx)];
        const Eigen::VectorXd a = p.enc_w * e.x + p.enc_b;
        const Eigen::VectorXd z = a.cwiseMax(0.0);
        const double l = p.cls_w.dot(z) + p.cls_b;
        const double u = p.rev_w.dot(z) + p.rev_b;
        const double s = softplus(u);

        const double dl = (sigmoid(l) - (e.illicit ? 1.0 : 0.0)) * inv_b;
        const double err = std::log1p(s) - std::log1p(e.revenue);
        const double du = revenue_loss_weight * 2.0 * err * sigmoid(u) / (1.0 + s) * inv_b;

        g.cls_w.noalias() += dl * z;
        g.cls_b += dl;
        g.rev_w.noalias() += du * z;
        g.rev_b += du;

        Eigen::VectorXd dz = dl * p.cls_w + du * p.rev_w;
        for (int i = 0; i < H; ++i)
            if (a[i] <= 0.0) dz[i] = 0.0;
        g.enc_w.noalias() += dz * e.x.transpose();
        g.enc_b.noalias() += dz;
    }
    return g;
}

namespace model_detail {

inline int param_count(int D, int H) { return H * D + H + H + 1 + H + 1; }

inline Eigen::VectorXd pack(const ModelParams& p) {
    const int H = static_cast<int>(p.enc_w.rows());
    const int D = static_cast<int>(p.enc_w.cols());
    Eigen::VectorXd v(param_count(D, H));
    int at = 0;
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < D; ++j) v[at++] = p.enc_w(i, j);
    for (int i = 0; i < H; ++i) v[at++] = p.enc_b[i];
    for (int i = 0; i < H; ++i) v[at++] = p.cls_w[i];
    v[at++] = p.cls_b;
    for (int i = 0; i < H; ++i) v[at++] = p.rev_w[i];
    v[at++] = p.rev_b;
    return v;
}

inline ModelParams unpack(const Eigen::VectorXd& v, int D, int H) {
    ModelParams p = zero_params(D, H);
    int at = 0;
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < D; ++j) p.enc_w(i, j) = v[at++];
    for (int i = 0; i < H; ++i) p.enc_b[i] = v[at++];
    for (int i = 0; i < H; ++i) p.cls_w[i] = v[at++];
    p.cls_b = v[at++];
    for (int i = 0; i < H; ++i) p.rev_w[i] = v[at++];
    p.rev_b = v[at++];
    return p;
}

}  // namespace model_detail

// Constant predictor used when a training window has one class only (or no
// rows at all): zero encoder, fraud score pinned to the clamped class prior,
// revenue estimate pinned to the mean observed seizure.
inline ModelSnapshot constant_fallback_model(int input_dim, int hidden_dim, double illicit_prior,
                                             double mean_revenue) {
    ModelSnapshot m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.constant_fallback = true;
    m.params = zero_params(input_dim, hidden_dim);
    m.params.cls_b = logit(std::clamp(illicit_prior, 0.01, 0.99));
    m.params.rev_b = softplus_inverse(std::max(mean_revenue, 0.0));
    return m;
}

// From-scratch training with Adam on shuffled mini-batches. Deterministic for
// a fixed config (seed included).
inline TrainResult train_model(const std::vector<Example>& items, const TrainConfig& cfg) {
    if (cfg.hidden_dim < 1) throw std::invalid_argument("train_model: hidden_dim must be >= 1");
    if (cfg.epochs < 1) throw std::invalid_argument("train_model: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_model: batch_size must be >= 1");
    if (cfg.learning_rate <= 0) throw std::invalid_argument("train_model: learning_rate must be > 0");

    const int n = static_cast<int>(items.size());
    long long illicit_count = 0;
    double revenue_sum = 0.0;
    for (const auto& e : items) {
        illicit_count += e.illicit ? 1 : 0;
        revenue_sum += e.revenue;
    }

    if (n == 0 || illicit_count == 0 || illicit_count == n) {
        const double prior = n == 0 ? 0.5 : static_cast<double>(illicit_count) / n;
        const double mean_rev = n == 0 ? 0.0 : revenue_sum / n;
        const int D = n == 0 ? 0 : static_cast<int>(items.front().x.size());
        TrainResult out;
        out.model = constant_fallback_model(D, cfg.hidden_dim, prior, mean_rev);
        if (n > 0) out.loss_trace.push_back(mean_loss(out.model.params, items, cfg.revenue_loss_weight));
        return out;
    }

    const int D = static_cast<int>(items.front().x.size());
    for (const auto& e : items)
        if (e.x.size() != D) throw std::invalid_argument("train_model: inconsistent feature dims");

    Rng rng(cfg.seed);
    ModelParams params = init_params(D, cfg.hidden_dim, rng);

    using model_detail::pack;
    using model_detail::unpack;
    Eigen::VectorXd theta = pack(params);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long long step = 0;

    TrainResult out;
    out.loss_trace.push_back(mean_loss(params, items, cfg.revenue_loss_weight));

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (int at = 0; at < n; at += cfg.batch_size) {
            const int stop = std::min(at + cfg.batch_size, n);
            batch.assign(order.begin() + at, order.begin() + stop);
            const Eigen::VectorXd grad =
                pack(loss_gradients(params, items, batch, cfg.revenue_loss_weight));
            ++step;
            m = beta1 * m + (1.0 - beta1) * grad;
            v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
            const double mc = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double vc = 1.0 - std::pow(beta2, static_cast<double>(step));
            theta -= cfg.learning_rate *
                     ((m / mc).array() / ((v / vc).array().sqrt() + adam_eps)).matrix();
            params = unpack(theta, D, cfg.hidden_dim);
        }
        out.loss_trace.push_back(mean_loss(params, items, cfg.revenue_loss_weight));
    }

    out.model.input_dim = D;
    out.model.hidden_dim = cfg.hidden_dim;
    out.model.constant_fallback = false;
    out.model.params = std::move(params);
    return out;
}

// Share of validation revenue captured when inspecting the top rate fraction
// (at least one item) ranked by fraud score. Ties keep input order.
inline double validation_revenue(const ModelSnapshot& model, const std::vector<Example>& validation,
                                 double rate) {
    if (validation.empty()) throw std::invalid_argument("validation_revenue: empty validation set");
    if (rate <= 0.0 || rate > 1.0) throw std::invalid_argument("validation_revenue: rate out of (0,1]");
    const int n = static_cast<int>(validation.size());
    const int k = std::max(1, static_cast<int>(std::floor(rate * n)));

    std::vector<double> scores(validation.size());
    double total = 0.0;
    for (std::size_t i = 0; i < validation.size(); ++i) {
        scores[i] = predict(model, validation[i].x).fraud_score;
        total += validation[i].revenue;
    }
    if (total == 0.0) return 0.0;

    std::vector<int> idx(validation.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });

    double captured = 0.0;
    for (int i = 0; i < k; ++i) captured += validation[static_cast<std::size_t>(idx[i])].revenue;
    return captured / total;
}

inline void to_json(nlohmann::json& j, const ModelParams& p) {
    const int H = static_cast<int>(p.enc_w.rows());
    const int D = static_cast<int>(p.enc_w.cols());
    nlohmann::json enc_w = nlohmann::json::array();
    for (int i = 0; i < H; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int jcol = 0; jcol < D; ++jcol) row.push_back(p.enc_w(i, jcol));
        enc_w.push_back(std::move(row));
    }
    auto vec = [](const Eigen::VectorXd& v) {
        nlohmann::json a = nlohmann::json::array();
        for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
        return a;
    };
    j = nlohmann::json{{"enc_w", std::move(enc_w)}, {"enc_b", vec(p.enc_b)},
                       {"cls_w", vec(p.cls_w)},     {"cls_b", p.cls_b},
                       {"rev_w", vec(p.rev_w)},     {"rev_b", p.rev_b}};
}

inline void from_json(const nlohmann::json& j, ModelParams& p) {
    const auto& enc_w = j.at("enc_w");
    const int H = static_cast<int>(enc_w.size());
    const int D = H == 0 ? 0 : static_cast<int>(enc_w.at(0).size());
    p = zero_params(D, H);
    for (int i = 0; i < H; ++i)
        for (int jcol = 0; jcol < D; ++jcol) p.enc_w(i, jcol) = enc_w.at(i).at(jcol).get<double>();
    auto vec = [&](const char* key, Eigen::VectorXd& v) {
        const auto& a = j.at(key);
        v.resize(static_cast<Eigen::Index>(a.size()));
        for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a.at(i).get<double>();
    };
    vec("enc_b", p.enc_b);
    vec("cls_w", p.cls_w);
    p.cls_b = j.at("cls_b").get<double>();
    vec("rev_w", p.rev_w);
    p.rev_b = j.at("rev_b").get<double>();
}

inline void to_json(nlohmann::json& j, const ModelSnapshot& m) {
    j = nlohmann::json{{"input_dim", m.input_dim},
                       {"hidden_dim", m.hidden_dim},
                       {"constant_fallback", m.constant_fallback},
                       {"params", m.params}};
}

inline void from_json(const nlohmann::json& j, ModelSnapshot& m) {
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.constant_fallback = j.at("constant_fallback").get<bool>();
    m.params = j.at("params").get<ModelParams>();
}

inline void write_loss_trace_csv(const std::vector<double>& trace, std::ostream& out) {
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", trace[i]);
        out << i << ',' << buf << '\n';
    }
}

}  // namespace customs
