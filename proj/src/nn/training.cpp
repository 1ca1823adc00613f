#include "anoseg/nn/training.hpp"

#include "anoseg/error.hpp"
#include "anoseg/nn/optim.hpp"
#include "anoseg/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace anoseg::nn {

namespace {

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::ranges::shuffle(order, rng);
    return order;
}

// Copies the listed samples of a 4-D tensor into a new batch.
Tensor gather(const Tensor& all, std::span<const std::size_t> idx) {
    Shape s = all.shape();
    s.n = static_cast<int>(idx.size());
    Tensor out(s);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::ranges::copy(all.sample(static_cast<int>(idx[i])), out.sample(static_cast<int>(i)).begin());
    }
    return out;
}

void check_finite(double loss, int epoch) {
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss in epoch " + std::to_string(epoch));
}

Image fit_to(const Image& patch, int size) {
    if (patch.height() == size && patch.width() == size) return patch;
    return resize_bilinear(patch, size, size);
}

} // namespace

void ReconstructorConfig::validate() const {
    if (patch_size < 8 || patch_size % 8 != 0) throw ConfigError("patch_size must be a positive multiple of 8");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    weights.validate();
}

std::vector<Image> collect_training_patches(const DatasetManifest& manifest, int patch_size, int max_patches,
                                            std::uint64_t seed) {
    if (max_patches < 1) throw ConfigError("max_patches must be at least 1");
    std::vector<Image> patches;
    for (const ManifestEntry* entry : manifest.with_role(Role::Train)) {
        const Image scan = load_image(manifest.resolve(*entry), true);
        PatchGrid grid = decompose_patches(scan, patch_size);
        for (Image& p : grid.patches) patches.push_back(std::move(p));
    }
    if (patches.empty()) throw ConfigError("training set contains no train-role scans");
    if (static_cast<int>(patches.size()) > max_patches) {
        std::vector<std::size_t> order = shuffled_order(patches.size(), mix_seed(seed, 0x70a7c4));
        order.resize(static_cast<std::size_t>(max_patches));
        std::ranges::sort(order);
        std::vector<Image> kept;
        kept.reserve(order.size());
        for (std::size_t i : order) kept.push_back(std::move(patches[i]));
        patches = std::move(kept);
    }
    return patches;
}

TrainingResult train_reconstructor(std::span<const Image> patches, const FeatureExtractor& extractor,
                                   const ReconstructorConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (patches.empty()) throw ConfigError("cannot train on an empty patch set");
    for (const Image& p : patches) {
        if (p.height() != cfg.patch_size || p.width() != cfg.patch_size) {
            throw ShapeError("training patch is " + std::to_string(p.height()) + "x" + std::to_string(p.width()) +
                             ", expected " + std::to_string(cfg.patch_size));
        }
    }

    TrainingResult result;
    result.net = build_reconstructor(patches.front().channels(), cfg.seed);
    if (cfg.epochs == 0) return result;

    const Tensor clean = to_batch(patches);
    // Targets never change, so their features are computed once.
    const Tensor clean_features = extractor.features(clean);

    AdamState adam = AdamState::for_network(result.net, cfg.learning_rate);
    Gradients grads = result.net.make_gradients();
    ForwardTape tape;
    const std::size_t n = patches.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> order = shuffled_order(n, mix_seed(cfg.seed, 1, static_cast<std::uint64_t>(epoch)));
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const std::size_t> idx(order.data() + start, end - start);

            const Tensor target = gather(clean, idx);
            const Tensor target_features = gather(clean_features, idx);
            Tensor input(target.shape());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const std::uint64_t noise_seed = mix_seed(cfg.seed, 2 + static_cast<std::uint64_t>(epoch), idx[i]);
                const Image noisy = perturb_gaussian(patches[idx[i]], cfg.noise_std, noise_seed);
                std::ranges::copy(noisy.data(), input.sample(static_cast<int>(i)).begin());
            }

            const Tensor output = result.net.forward(input, &tape);
            const LossResult loss = loss_stylization(target, output, extractor, cfg.weights, &target_features);
            check_finite(loss.value, epoch);
            grads.zero();
            result.net.backward(tape, loss.grad, &grads, false);
            const auto params = result.net.parameter_blocks();
            adam_step(adam, params, grads);
            epoch_sum += loss.value * static_cast<double>(idx.size());
        }
        const double mean = epoch_sum / static_cast<double>(n);
        check_finite(mean, epoch);
        result.loss_history.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    if (cfg.calibrate_bias) result.bias_offsets = calibrate_output_bias(result.net, patches);
    return result;
}

std::vector<double> calibrate_output_bias(Network& net, std::span<const Image> patches) {
    if (patches.empty()) throw ConfigError("bias calibration needs at least one patch");
    auto* last = net.layers().empty() ? nullptr : std::get_if<Conv3x3>(&net.layers().back());
    if (last == nullptr || last->relu) throw ShapeError("bias calibration needs a linear convolution output layer");

    std::vector<double> offsets(static_cast<std::size_t>(last->out_channels), 0.0);
    std::size_t count = 0;
    constexpr std::size_t chunk = 32;
    for (std::size_t start = 0; start < patches.size(); start += chunk) {
        const std::size_t end = std::min(patches.size(), start + chunk);
        const Tensor in = to_batch(patches.subspan(start, end - start));
        const Tensor out = net.forward(in);
        if (out.shape() != in.shape()) throw ShapeError("bias calibration needs a shape-preserving network");
        const std::size_t plane = in.shape().plane_size();
        for (int n = 0; n < in.shape().n; ++n) {
            const auto x = in.sample(n);
            const auto y = out.sample(n);
            for (std::size_t c = 0; c < offsets.size(); ++c) {
                for (std::size_t k = 0; k < plane; ++k) offsets[c] += x[c * plane + k] - y[c * plane + k];
            }
        }
        count += (end - start) * plane;
    }
    for (std::size_t c = 0; c < offsets.size(); ++c) {
        offsets[c] /= static_cast<double>(count);
        last->bias[c] += offsets[c];
    }
    return offsets;
}

Image reconstruct(const Network& net, const Image& scan, int patch_size) {
    PatchGrid grid = decompose_patches(scan, patch_size);
    constexpr std::size_t chunk = 16;
    for (std::size_t start = 0; start < grid.patches.size(); start += chunk) {
        const std::size_t end = std::min(grid.patches.size(), start + chunk);
        const Tensor out = net.forward(to_batch(std::span<const Image>(grid.patches.data() + start, end - start)));
        if (out.shape().c != scan.channels() || out.shape().h != patch_size || out.shape().w != patch_size) {
            throw ShapeError("reconstructor output " + out.shape().str() + " does not match the patch shape");
        }
        for (std::size_t i = start; i < end; ++i) grid.patches[i] = to_image(out, static_cast<int>(i - start));
    }
    return clamp01(reassemble_patches(grid));
}

void ClassifierConfig::validate() const {
    if (input_size < 8 || input_size % 8 != 0) throw ConfigError("classifier input size must be a positive multiple of 8");
    if (epochs < 0) throw ConfigError("classifier epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("classifier batch size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("classifier learning rate must be positive");
}

ClassifierResult train_classifier(std::span<const Image> patches, std::span<const int> labels, int n_classes,
                                  const ClassifierConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (patches.size() != labels.size()) throw ShapeError("patch and label counts differ");
    if (patches.empty()) throw ConfigError("cannot train a classifier on zero patches");
    if (n_classes < 2) throw ConfigError("classifier needs at least two classes");
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (int l : labels) {
        if (l < 0 || l >= n_classes) throw ConfigError("class label " + std::to_string(l) + " out of range");
        seen[static_cast<std::size_t>(l)] = true;
    }
    if (std::ranges::count(seen, true) < 2) throw ConfigError("classifier training data contains a single class");

    std::vector<Image> inputs;
    inputs.reserve(patches.size());
    for (const Image& p : patches) {
        if (p.channels() != patches.front().channels()) throw ShapeError("classifier patches differ in channel count");
        inputs.push_back(fit_to(p, cfg.input_size));
    }
    const Tensor all = to_batch(inputs);
    Tensor one_hot(Shape{static_cast<int>(labels.size()), n_classes, 1, 1});
    for (std::size_t i = 0; i < labels.size(); ++i) one_hot.at(static_cast<int>(i), labels[i], 0, 0) = 1.0;

    ClassifierResult result;
    result.net = build_classifier(n_classes, cfg.input_size, all.shape().c, cfg.seed);
    AdamState adam = AdamState::for_network(result.net, cfg.learning_rate);
    Gradients grads = result.net.make_gradients();
    ForwardTape tape;
    const std::size_t n = inputs.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> order = shuffled_order(n, mix_seed(cfg.seed, 11, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Tensor x = gather(all, idx);
            const Tensor t = gather(one_hot, idx);
            const Tensor probs = result.net.forward(x, &tape);
            const LossResult loss = loss_cross_entropy(probs, t);
            check_finite(loss.value, epoch);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const auto row = probs.sample(static_cast<int>(i));
                const auto best = std::ranges::max_element(row) - row.begin();
                if (best == labels[idx[i]]) ++correct;
            }
            grads.zero();
            result.net.backward(tape, loss.grad, &grads, false);
            const auto params = result.net.parameter_blocks();
            adam_step(adam, params, grads);
            loss_sum += loss.value * static_cast<double>(idx.size());
        }
        result.loss_history.push_back(loss_sum / static_cast<double>(n));
        result.accuracy_history.push_back(static_cast<double>(correct) / static_cast<double>(n));
        if (on_epoch) on_epoch(epoch, result.loss_history.back());
    }
    return result;
}

Tensor predict_probabilities(const Network& net, std::span<const Image> patches, int input_size) {
    if (patches.empty()) throw ShapeError("no patches to classify");
    std::vector<Image> inputs;
    inputs.reserve(patches.size());
    for (const Image& p : patches) inputs.push_back(fit_to(p, input_size));
    const Tensor out = net.forward(to_batch(inputs));
    if (out.shape().h != 1 || out.shape().w != 1) throw ShapeError("network does not produce class probabilities");
    return out;
}

std::vector<int> predict_labels(const Network& net, std::span<const Image> patches, int input_size) {
    const Tensor probs = predict_probabilities(net, patches, input_size);
    std::vector<int> labels;
    for (int i = 0; i < probs.shape().n; ++i) {
        const auto row = probs.sample(i);
        labels.push_back(static_cast<int>(std::ranges::max_element(row) - row.begin()));
    }
    return labels;
}

} // namespace anoseg::nn
