#include "anoseg/nn/losses.hpp"

#include "anoseg/error.hpp"

#include <algorithm>
#include <cmath>

namespace anoseg::nn {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape " + a.shape().str() + " vs " + b.shape().str());
    }
    if (a.empty()) throw ShapeError(std::string(what) + ": empty tensors");
}

} // namespace

FeatureExtractor FeatureExtractor::builtin(int channels, std::uint64_t seed) {
    return FeatureExtractor(build_feature_stack(channels, seed));
}

FeatureExtractor FeatureExtractor::identity() { return FeatureExtractor(Network{}); }

FeatureExtractor FeatureExtractor::from_file(const std::filesystem::path& path) {
    Network net = load_weights(path);
    for (const Layer& layer : net.layers()) {
        if (std::holds_alternative<Softmax>(layer)) throw IoError("feature extractor may not contain softmax layers");
    }
    return FeatureExtractor(std::move(net));
}

Tensor FeatureExtractor::features(const Tensor& input, ForwardTape* tape) const {
    if (net_.empty()) return input;
    return net_.forward(input, tape);
}

Tensor FeatureExtractor::input_gradient(const ForwardTape& tape, const Tensor& grad_features) const {
    if (net_.empty()) return grad_features;
    return net_.backward(tape, grad_features, nullptr, true);
}

void LossWeights::validate() const {
    if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0) || !std::isfinite(alpha1) || !std::isfinite(alpha2)) {
        throw ConfigError("loss weights must be finite and non-negative");
    }
}

LossResult loss_l2(const Tensor& target, const Tensor& prediction) {
    require_same(target, prediction, "loss_l2");
    const double n = static_cast<double>(target.size());
    LossResult r{0.0, Tensor(prediction.shape())};
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = prediction[i] - target[i];
        r.value += d * d;
        r.grad[i] = 2.0 * d / n;
    }
    r.value /= n;
    return r;
}

LossResult loss_feature(const Tensor& target, const Tensor& prediction, const FeatureExtractor& f,
                        const Tensor* target_features) {
    require_same(target, prediction, "loss_feature");
    Tensor ft_local;
    if (target_features == nullptr) {
        ft_local = f.features(target);
        target_features = &ft_local;
    }
    ForwardTape tape;
    const Tensor fp = f.features(prediction, &tape);
    require_same(*target_features, fp, "loss_feature features");

    const double n = static_cast<double>(fp.size());
    LossResult r;
    Tensor g(fp.shape());
    for (std::size_t i = 0; i < fp.size(); ++i) {
        const double d = fp[i] - (*target_features)[i];
        r.value += std::abs(d);
        g[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    r.value /= n;
    r.grad = f.input_gradient(tape, g);
    return r;
}

LossResult loss_stylization(const Tensor& target, const Tensor& prediction, const FeatureExtractor& f,
                            const LossWeights& w, const Tensor* target_features) {
    w.validate();
    LossResult lf = loss_feature(target, prediction, f, target_features);
    LossResult l2 = loss_l2(target, prediction);
    LossResult r{w.alpha1 * lf.value + w.alpha2 * l2.value, Tensor(prediction.shape())};
    for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] = w.alpha1 * lf.grad[i] + w.alpha2 * l2.grad[i];
    return r;
}

LossResult loss_cross_entropy(const Tensor& probs, const Tensor& one_hot) {
    require_same(probs, one_hot, "loss_cross_entropy");
    constexpr double floor = 1e-12;
    const double b = probs.shape().n;
    LossResult r{0.0, Tensor(probs.shape())};
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (one_hot[i] == 0.0) continue;
        const double p = probs[i];
        r.value -= one_hot[i] * std::log(std::max(p, floor));
        r.grad[i] = p > floor ? -one_hot[i] / (b * p) : 0.0;
    }
    r.value /= b;
    return r;
}

} // namespace anoseg::nn
