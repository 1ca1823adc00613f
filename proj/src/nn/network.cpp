#include "anoseg/nn/network.hpp"

#include "anoseg/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace anoseg::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Copies an h x w plane into a zero-bordered (h+2) x (w+2) buffer.
void pad_plane(const double* src, int h, int w, double* dst) {
    const int pw = w + 2;
    std::fill(dst, dst + static_cast<std::size_t>(h + 2) * pw, 0.0);
    for (int y = 0; y < h; ++y) std::copy(src + static_cast<std::size_t>(y) * w, src + static_cast<std::size_t>(y + 1) * w, dst + (y + 1) * pw + 1);
}

// out[y][x] += sum_{ky,kx} k[ky][kx] * padded[y+ky][x+kx]
void accumulate_3x3(const double* padded, const double* k, int h, int w, double* out) {
    const int pw = w + 2;
    for (int y = 0; y < h; ++y) {
        const double* r0 = padded + static_cast<std::size_t>(y) * pw;
        const double* r1 = r0 + pw;
        const double* r2 = r1 + pw;
        double* o = out + static_cast<std::size_t>(y) * w;
#pragma omp simd
        for (int x = 0; x < w; ++x) {
            o[x] += k[0] * r0[x] + k[1] * r0[x + 1] + k[2] * r0[x + 2] + k[3] * r1[x] + k[4] * r1[x + 1] +
                    k[5] * r1[x + 2] + k[6] * r2[x] + k[7] * r2[x + 1] + k[8] * r2[x + 2];
        }
    }
}

// acc[ky][kx] += sum_{y,x} g[y][x] * padded[y+ky][x+kx]
void correlate_3x3(const double* padded, const double* g, int h, int w, double* acc) {
    const int pw = w + 2;
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
    for (int y = 0; y < h; ++y) {
        const double* r0 = padded + static_cast<std::size_t>(y) * pw;
        const double* r1 = r0 + pw;
        const double* r2 = r1 + pw;
        const double* gr = g + static_cast<std::size_t>(y) * w;
#pragma omp simd reduction(+ : a0, a1, a2, a3, a4, a5, a6, a7, a8)
        for (int x = 0; x < w; ++x) {
            const double v = gr[x];
            a0 += v * r0[x];
            a1 += v * r0[x + 1];
            a2 += v * r0[x + 2];
            a3 += v * r1[x];
            a4 += v * r1[x + 1];
            a5 += v * r1[x + 2];
            a6 += v * r2[x];
            a7 += v * r2[x + 1];
            a8 += v * r2[x + 2];
        }
    }
    acc[0] += a0;
    acc[1] += a1;
    acc[2] += a2;
    acc[3] += a3;
    acc[4] += a4;
    acc[5] += a5;
    acc[6] += a6;
    acc[7] += a7;
    acc[8] += a8;
}

Tensor conv_forward(const Conv3x3& L, const Tensor& in) {
    const Shape s = in.shape();
    Tensor out(Shape{s.n, L.out_channels, s.h, s.w});
    const std::size_t plane = s.plane_size();
    const std::size_t padded_plane = static_cast<std::size_t>(s.h + 2) * (s.w + 2);
    std::vector<double> padded(padded_plane * s.c);
    for (int n = 0; n < s.n; ++n) {
        const double* src = in.sample(n).data();
        for (int i = 0; i < s.c; ++i) pad_plane(src + i * plane, s.h, s.w, padded.data() + i * padded_plane);
        double* dst = out.sample(n).data();
        for (int o = 0; o < L.out_channels; ++o) {
            double* op = dst + o * plane;
            std::fill(op, op + plane, L.bias[o]);
            for (int i = 0; i < s.c; ++i) {
                accumulate_3x3(padded.data() + i * padded_plane, &L.weight[(static_cast<std::size_t>(o) * L.in_channels + i) * 9],
                               s.h, s.w, op);
            }
            if (L.relu) {
                for (std::size_t p = 0; p < plane; ++p) op[p] = std::max(op[p], 0.0);
            }
        }
    }
    return out;
}

Tensor conv_backward(const Conv3x3& L, const Tensor& in, const Tensor& out, const Tensor& grad_out, double* dW,
                     double* dB, bool need_input_grad) {
    const Shape s = in.shape();
    const std::size_t plane = s.plane_size();
    const std::size_t padded_plane = static_cast<std::size_t>(s.h + 2) * (s.w + 2);
    Tensor grad_in;
    if (need_input_grad) grad_in = Tensor(s);

    std::vector<double> pre(grad_out.sample(0).size());
    std::vector<double> padded_in(dW ? padded_plane * s.c : 0);
    std::vector<double> padded_g(need_input_grad ? padded_plane : 0);
    std::array<double, 9> flipped{};

    for (int n = 0; n < s.n; ++n) {
        // gradient w.r.t. the pre-activation
        const auto g = grad_out.sample(n);
        const auto o_vals = out.sample(n);
        for (std::size_t p = 0; p < pre.size(); ++p) pre[p] = (!L.relu || o_vals[p] > 0.0) ? g[p] : 0.0;

        if (dW != nullptr) {
            const double* src = in.sample(n).data();
            for (int i = 0; i < s.c; ++i) pad_plane(src + i * plane, s.h, s.w, padded_in.data() + i * padded_plane);
        }
        for (int o = 0; o < L.out_channels; ++o) {
            const double* gp = pre.data() + o * plane;
            if (dB != nullptr) {
                double sum = 0;
                for (std::size_t p = 0; p < plane; ++p) sum += gp[p];
                dB[o] += sum;
            }
            if (dW != nullptr) {
                for (int i = 0; i < s.c; ++i) {
                    correlate_3x3(padded_in.data() + i * padded_plane, gp, s.h, s.w,
                                  dW + (static_cast<std::size_t>(o) * L.in_channels + i) * 9);
                }
            }
            if (need_input_grad) {
                pad_plane(gp, s.h, s.w, padded_g.data());
                double* gi = grad_in.sample(n).data();
                for (int i = 0; i < s.c; ++i) {
                    const double* k = &L.weight[(static_cast<std::size_t>(o) * L.in_channels + i) * 9];
                    for (int t = 0; t < 9; ++t) flipped[t] = k[8 - t];
                    accumulate_3x3(padded_g.data(), flipped.data(), s.h, s.w, gi + i * plane);
                }
            }
        }
    }
    return grad_in;
}

Tensor pool_forward(const Tensor& in, std::vector<std::uint32_t>* argmax) {
    const Shape s = in.shape();
    const int oh = s.h / 2;
    const int ow = s.w / 2;
    Tensor out(Shape{s.n, s.c, oh, ow});
    if (argmax != nullptr) argmax->assign(out.size(), 0);
    std::size_t k = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x, ++k) {
                    std::uint32_t best_idx = static_cast<std::uint32_t>((2 * y) * s.w + 2 * x);
                    double best = in.at(n, c, 2 * y, 2 * x);
                    for (int q = 1; q < 4; ++q) {
                        const int yy = 2 * y + q / 2;
                        const int xx = 2 * x + q % 2;
                        const double v = in.at(n, c, yy, xx);
                        if (v > best) {
                            best = v;
                            best_idx = static_cast<std::uint32_t>(yy * s.w + xx);
                        }
                    }
                    out[k] = best;
                    if (argmax != nullptr) (*argmax)[k] = best_idx;
                }
            }
        }
    }
    return out;
}

void require(bool cond, const std::string& what) {
    if (!cond) throw ShapeError(what);
}

bool same_conv(const Conv3x3& a, const Conv3x3& b) {
    return a.in_channels == b.in_channels && a.out_channels == b.out_channels && a.relu == b.relu &&
           a.weight == b.weight && a.bias == b.bias;
}

bool same_fc(const FullyConnected& a, const FullyConnected& b) {
    return a.in_features == b.in_features && a.out_features == b.out_features && a.weight == b.weight &&
           a.bias == b.bias;
}

} // namespace

void Gradients::zero() {
    for (auto& b : blocks) std::ranges::fill(b, 0.0);
}

Conv3x3 make_conv(int in_channels, int out_channels, bool relu) {
    if (in_channels < 1 || out_channels < 1) throw ShapeError("conv channel counts must be positive");
    Conv3x3 c;
    c.in_channels = in_channels;
    c.out_channels = out_channels;
    c.relu = relu;
    c.weight.assign(static_cast<std::size_t>(in_channels) * out_channels * 9, 0.0);
    c.bias.assign(out_channels, 0.0);
    return c;
}

FullyConnected make_fc(int in_features, int out_features) {
    if (in_features < 1 || out_features < 1) throw ShapeError("fully connected sizes must be positive");
    FullyConnected f;
    f.in_features = in_features;
    f.out_features = out_features;
    f.weight.assign(static_cast<std::size_t>(in_features) * out_features, 0.0);
    f.bias.assign(out_features, 0.0);
    return f;
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {}

Shape Network::output_shape(const Shape& input) const {
    Shape s = input;
    for (const Layer& layer : layers_) {
        std::visit(Overloaded{
                       [&](const Conv3x3& c) {
                           require(s.c == c.in_channels, "conv expects " + std::to_string(c.in_channels) +
                                                             " channels, got shape " + s.str());
                           s.c = c.out_channels;
                       },
                       [&](const MaxPool2&) {
                           require(s.h % 2 == 0 && s.w % 2 == 0 && s.h > 0 && s.w > 0,
                                   "max-pool needs even spatial dims, got " + s.str());
                           s.h /= 2;
                           s.w /= 2;
                       },
                       [&](const Upsample2&) {
                           s.h *= 2;
                           s.w *= 2;
                       },
                       [&](const Flatten&) { s = Shape{s.n, s.c * s.h * s.w, 1, 1}; },
                       [&](const FullyConnected& f) {
                           require(s.h == 1 && s.w == 1 && s.c == f.in_features,
                                   "fully connected expects " + std::to_string(f.in_features) +
                                       " features, got shape " + s.str());
                           s.c = f.out_features;
                       },
                       [&](const Softmax&) { require(s.h == 1 && s.w == 1, "softmax expects a feature vector"); },
                   },
                   layer);
    }
    return s;
}

Tensor Network::forward(const Tensor& input, ForwardTape* tape) const {
    output_shape(input.shape());
    if (tape != nullptr) {
        tape->inputs.clear();
        tape->outputs.clear();
        tape->argmax.clear();
    }
    Tensor x = input;
    for (const Layer& layer : layers_) {
        std::vector<std::uint32_t> argmax;
        Tensor y = std::visit(
            Overloaded{
                [&](const Conv3x3& c) { return conv_forward(c, x); },
                [&](const MaxPool2&) { return pool_forward(x, tape ? &argmax : nullptr); },
                [&](const Upsample2&) {
                    const Shape s = x.shape();
                    Tensor out(Shape{s.n, s.c, s.h * 2, s.w * 2});
                    for (int n = 0; n < s.n; ++n) {
                        for (int c = 0; c < s.c; ++c) {
                            for (int yy = 0; yy < s.h * 2; ++yy) {
                                for (int xx = 0; xx < s.w * 2; ++xx) out.at(n, c, yy, xx) = x.at(n, c, yy / 2, xx / 2);
                            }
                        }
                    }
                    return out;
                },
                [&](const Flatten&) {
                    const Shape s = x.shape();
                    return x.reshaped(Shape{s.n, s.c * s.h * s.w, 1, 1});
                },
                [&](const FullyConnected& f) {
                    const int n = x.shape().n;
                    Tensor out(Shape{n, f.out_features, 1, 1});
                    for (int b = 0; b < n; ++b) {
                        const auto in = x.sample(b);
                        for (int o = 0; o < f.out_features; ++o) {
                            const double* wrow = &f.weight[static_cast<std::size_t>(o) * f.in_features];
                            double sum = f.bias[o];
                            for (int i = 0; i < f.in_features; ++i) sum += wrow[i] * in[i];
                            out.at(b, o, 0, 0) = sum;
                        }
                    }
                    return out;
                },
                [&](const Softmax&) {
                    Tensor out = x;
                    for (int b = 0; b < x.shape().n; ++b) {
                        auto row = out.sample(b);
                        const double peak = *std::ranges::max_element(row);
                        double sum = 0;
                        for (double& v : row) {
                            v = std::exp(v - peak);
                            sum += v;
                        }
                        for (double& v : row) v /= sum;
                    }
                    return out;
                },
            },
            layer);
        if (tape != nullptr) {
            tape->inputs.push_back(std::move(x));
            tape->outputs.push_back(y);
            tape->argmax.push_back(std::move(argmax));
        }
        x = std::move(y);
    }
    return x;
}

Tensor Network::backward(const ForwardTape& tape, const Tensor& grad_output, Gradients* grads,
                         bool need_input_grad) const {
    if (!tape.recorded() || tape.inputs.size() != layers_.size()) {
        throw std::logic_error("backward called without a recorded forward pass");
    }
    if (grad_output.shape() != tape.outputs.back().shape()) {
        throw ShapeError("loss gradient shape " + grad_output.shape().str() + " does not match network output " +
                         tape.outputs.back().shape().str());
    }

    // Locate each parametric layer's first gradient block.
    std::vector<int> block_of(layers_.size(), -1);
    int block = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (std::holds_alternative<Conv3x3>(layers_[i]) || std::holds_alternative<FullyConnected>(layers_[i])) {
            block_of[i] = block;
            block += 2;
        }
    }
    if (grads != nullptr && static_cast<int>(grads->blocks.size()) != block) {
        throw ShapeError("gradient buffer does not match network parameters");
    }

    Tensor g = grad_output;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Tensor& in = tape.inputs[li];
        const Tensor& out = tape.outputs[li];
        const bool want_input = need_input_grad || li > 0;
        double* dW = (grads != nullptr && block_of[li] >= 0) ? grads->blocks[block_of[li]].data() : nullptr;
        double* dB = (grads != nullptr && block_of[li] >= 0) ? grads->blocks[block_of[li] + 1].data() : nullptr;

        g = std::visit(
            Overloaded{
                [&](const Conv3x3& c) { return conv_backward(c, in, out, g, dW, dB, want_input); },
                [&](const MaxPool2&) {
                    Tensor gi(in.shape());
                    const auto& idx = tape.argmax[li];
                    const Shape os = out.shape();
                    const std::size_t in_plane = in.shape().plane_size();
                    const std::size_t out_plane = os.plane_size();
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        const std::size_t nc = k / out_plane;
                        gi[nc * in_plane + idx[k]] += g[k];
                    }
                    return gi;
                },
                [&](const Upsample2&) {
                    Tensor gi(in.shape());
                    const Shape s = in.shape();
                    for (int n = 0; n < s.n; ++n) {
                        for (int c = 0; c < s.c; ++c) {
                            for (int yy = 0; yy < s.h * 2; ++yy) {
                                for (int xx = 0; xx < s.w * 2; ++xx) gi.at(n, c, yy / 2, xx / 2) += g.at(n, c, yy, xx);
                            }
                        }
                    }
                    return gi;
                },
                [&](const Flatten&) { return g.reshaped(in.shape()); },
                [&](const FullyConnected& f) {
                    Tensor gi(in.shape());
                    for (int b = 0; b < in.shape().n; ++b) {
                        const auto x = in.sample(b);
                        const auto gy = g.sample(b);
                        auto gx = gi.sample(b);
                        for (int o = 0; o < f.out_features; ++o) {
                            const double go = gy[o];
                            const std::size_t row = static_cast<std::size_t>(o) * f.in_features;
                            if (dB != nullptr) dB[o] += go;
                            if (dW != nullptr) {
                                for (int i = 0; i < f.in_features; ++i) dW[row + i] += go * x[i];
                            }
                            for (int i = 0; i < f.in_features; ++i) gx[i] += f.weight[row + i] * go;
                        }
                    }
                    return gi;
                },
                [&](const Softmax&) {
                    Tensor gi(in.shape());
                    for (int b = 0; b < in.shape().n; ++b) {
                        const auto p = out.sample(b);
                        const auto gy = g.sample(b);
                        auto gx = gi.sample(b);
                        double dot = 0;
                        for (std::size_t j = 0; j < p.size(); ++j) dot += gy[j] * p[j];
                        for (std::size_t j = 0; j < p.size(); ++j) gx[j] = p[j] * (gy[j] - dot);
                    }
                    return gi;
                },
            },
            layers_[li]);
        if (!want_input) break;
    }
    return need_input_grad ? g : Tensor{};
}

std::vector<std::span<double>> Network::parameter_blocks() {
    std::vector<std::span<double>> out;
    for (Layer& layer : layers_) {
        if (auto* c = std::get_if<Conv3x3>(&layer)) {
            out.emplace_back(c->weight);
            out.emplace_back(c->bias);
        } else if (auto* f = std::get_if<FullyConnected>(&layer)) {
            out.emplace_back(f->weight);
            out.emplace_back(f->bias);
        }
    }
    return out;
}

std::vector<std::span<const double>> Network::parameter_blocks() const {
    std::vector<std::span<const double>> out;
    for (const Layer& layer : layers_) {
        if (const auto* c = std::get_if<Conv3x3>(&layer)) {
            out.emplace_back(c->weight);
            out.emplace_back(c->bias);
        } else if (const auto* f = std::get_if<FullyConnected>(&layer)) {
            out.emplace_back(f->weight);
            out.emplace_back(f->bias);
        }
    }
    return out;
}

Gradients Network::make_gradients() const {
    Gradients g;
    for (const auto& block : parameter_blocks()) g.blocks.emplace_back(block.size(), 0.0);
    return g;
}

std::size_t Network::parameter_count() const {
    std::size_t total = 0;
    for (const auto& block : parameter_blocks()) total += block.size();
    return total;
}

LayerCounts Network::counts() const {
    LayerCounts k;
    for (const Layer& layer : layers_) {
        std::visit(Overloaded{
                       [&](const Conv3x3& c) {
                           ++k.convs;
                           if (c.relu) ++k.relus;
                       },
                       [&](const MaxPool2&) { ++k.pools; },
                       [&](const Upsample2&) { ++k.upsamples; },
                       [&](const Flatten&) {},
                       [&](const FullyConnected&) { ++k.fully_connected; },
                       [&](const Softmax&) { ++k.softmax; },
                   },
                   layer);
    }
    return k;
}

bool operator==(const Network& a, const Network& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        if (a.layers_[i].index() != b.layers_[i].index()) return false;
        if (const auto* c = std::get_if<Conv3x3>(&a.layers_[i])) {
            if (!same_conv(*c, std::get<Conv3x3>(b.layers_[i]))) return false;
        } else if (const auto* f = std::get_if<FullyConnected>(&a.layers_[i])) {
            if (!same_fc(*f, std::get<FullyConnected>(b.layers_[i]))) return false;
        }
    }
    return true;
}

void he_uniform_init(Network& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (Layer& layer : net.layers()) {
        auto fill = [&](std::vector<double>& w, std::vector<double>& b, int fan_in) {
            const double limit = std::sqrt(6.0 / fan_in);
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (double& v : w) v = dist(rng);
            std::ranges::fill(b, 0.0);
        };
        if (auto* c = std::get_if<Conv3x3>(&layer)) fill(c->weight, c->bias, c->in_channels * 9);
        else if (auto* f = std::get_if<FullyConnected>(&layer)) fill(f->weight, f->bias, f->in_features);
    }
}

Network build_reconstructor(int channels, std::uint64_t seed) {
    if (channels != 1 && channels != 3) throw ConfigError("reconstructor channels must be 1 or 3");
    Network net({
        make_conv(channels, 9), MaxPool2{},
        make_conv(9, 10), MaxPool2{},
        make_conv(10, 10), MaxPool2{},
        make_conv(10, 10), Upsample2{},
        make_conv(10, 10), Upsample2{},
        make_conv(10, 10), Upsample2{},
        make_conv(10, channels, false),
    });
    he_uniform_init(net, seed);
    return net;
}

Network build_feature_stack(int channels, std::uint64_t seed) {
    if (channels < 1) throw ConfigError("feature stack channels must be positive");
    Network net({
        make_conv(channels, 16), MaxPool2{},
        make_conv(16, 16), MaxPool2{},
        make_conv(16, 16), MaxPool2{},
    });
    he_uniform_init(net, seed);
    return net;
}

Network build_classifier(int n_classes, int input_size, int channels, std::uint64_t seed) {
    if (n_classes < 2) throw ConfigError("classifier needs at least two classes");
    if (input_size < 8 || input_size % 8 != 0) throw ConfigError("classifier input size must be a positive multiple of 8");
    if (channels < 1) throw ConfigError("classifier channels must be positive");
    const int side = input_size / 8;
    Network net({
        make_conv(channels, 16), MaxPool2{},
        make_conv(16, 32), MaxPool2{},
        make_conv(32, 64), MaxPool2{},
        Flatten{},
        make_fc(64 * side * side, n_classes),
        Softmax{},
    });
    he_uniform_init(net, seed);
    return net;
}

// ---------------------------------------------------------------------------
// Weights file
//
//   "ANW1" | u32 layer_count | per layer: u32 tag, u32 shape..., f32 weights, f32 biases
//   tags: 1 conv3x3+ReLU (in,out), 2 conv3x3 linear (in,out), 3 maxpool2, 4 upsample2,
//         5 flatten, 6 fully connected (in,out), 7 softmax
// ---------------------------------------------------------------------------

namespace {

enum Tag : std::uint32_t { ConvRelu = 1, ConvLinear = 2, Pool = 3, Up = 4, Flat = 5, Dense = 6, Soft = 7 };

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::ranges::reverse(bytes);
        return std::bit_cast<T>(bytes);
    }
    return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_floats(std::ostream& out, const std::vector<double>& values) {
    for (double d : values) {
        float f = to_little(static_cast<float>(d));
        out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("truncated weights file");
    return to_little(v);
}

void get_floats(std::istream& in, std::vector<double>& values) {
    for (double& d : values) {
        float f = 0;
        in.read(reinterpret_cast<char*>(&f), sizeof f);
        if (!in) throw IoError("truncated weights file");
        f = to_little(f);
        if (!std::isfinite(f)) throw IoError("non-finite value in weights file");
        d = f;
    }
}

} // namespace

void save_weights(const std::filesystem::path& path, const Network& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write weights file " + path.string());
    out.write("ANW1", 4);
    put_u32(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const Layer& layer : net.layers()) {
        std::visit(Overloaded{
                       [&](const Conv3x3& c) {
                           put_u32(out, c.relu ? ConvRelu : ConvLinear);
                           put_u32(out, static_cast<std::uint32_t>(c.in_channels));
                           put_u32(out, static_cast<std::uint32_t>(c.out_channels));
                           put_floats(out, c.weight);
                           put_floats(out, c.bias);
                       },
                       [&](const MaxPool2&) { put_u32(out, Pool); },
                       [&](const Upsample2&) { put_u32(out, Up); },
                       [&](const Flatten&) { put_u32(out, Flat); },
                       [&](const FullyConnected& f) {
                           put_u32(out, Dense);
                           put_u32(out, static_cast<std::uint32_t>(f.in_features));
                           put_u32(out, static_cast<std::uint32_t>(f.out_features));
                           put_floats(out, f.weight);
                           put_floats(out, f.bias);
                       },
                       [&](const Softmax&) { put_u32(out, Soft); },
                   },
                   layer);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

Network load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weights file " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "ANW1", 4) != 0) throw IoError("not an ANW1 weights file: " + path.string());

    const std::uint32_t count = get_u32(in);
    if (count > 4096) throw IoError("implausible layer count in " + path.string());
    constexpr std::uint32_t max_dim = 1U << 16;
    Network net;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t tag = get_u32(in);
        switch (tag) {
            case ConvRelu:
            case ConvLinear: {
                const auto ic = get_u32(in);
                const auto oc = get_u32(in);
                if (ic == 0 || oc == 0 || ic > max_dim || oc > max_dim) throw IoError("bad conv shape in weights file");
                Conv3x3 c = make_conv(static_cast<int>(ic), static_cast<int>(oc), tag == ConvRelu);
                get_floats(in, c.weight);
                get_floats(in, c.bias);
                net.add(std::move(c));
                break;
            }
            case Pool: net.add(MaxPool2{}); break;
            case Up: net.add(Upsample2{}); break;
            case Flat: net.add(Flatten{}); break;
            case Dense: {
                const auto fi = get_u32(in);
                const auto fo = get_u32(in);
                if (fi == 0 || fo == 0 || fi > (1U << 24) || fo > max_dim) throw IoError("bad dense shape in weights file");
                FullyConnected f = make_fc(static_cast<int>(fi), static_cast<int>(fo));
                get_floats(in, f.weight);
                get_floats(in, f.bias);
                net.add(std::move(f));
                break;
            }
            case Soft: net.add(Softmax{}); break;
            default: throw IoError("unknown layer tag " + std::to_string(tag) + " in weights file");
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in weights file " + path.string());
    return net;
}

} // namespace anoseg::nn
