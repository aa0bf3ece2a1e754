#ifndef MSN_NETWORK_HPP
#define MSN_NETWORK_HPP

// Fixed-topology feed-forward networks evaluated over a flat parameter vector.
//
// Parameter layout is layer-major, weights before biases:
//   dense   weights[out][in], then biases[out]
//   conv2d  weights[out_c][in_c][k][k], then biases[out_c]
//   prelu   slopes[num_slopes]
//   maxpool (no parameters)
// Probes and blends index straight into this layout, so it must stay fixed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"
#include "msn/errors.hpp"
#include "msn/vecmath.hpp"

namespace msn {

struct Shape {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;

    [[nodiscard]] std::size_t size() const noexcept { return channels * height * width; }
    [[nodiscard]] static Shape flat(std::size_t n) noexcept { return {n, 1, 1}; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

struct Dense {
    std::size_t in_features = 1;
    std::size_t out_features = 1;
    friend bool operator==(const Dense&, const Dense&) = default;
};

/// Square-kernel convolution. `padding` is zero padding on every side.
struct Conv2d {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel_size = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    friend bool operator==(const Conv2d&, const Conv2d&) = default;
};

struct MaxPool2d {
    std::size_t window = 2;
    std::size_t stride = 2;
    friend bool operator==(const MaxPool2d&, const MaxPool2d&) = default;
};

/// Parametric ReLU. One shared slope, or one per channel.
struct PRelu {
    std::size_t num_slopes = 1;
    friend bool operator==(const PRelu&, const PRelu&) = default;
};

using LayerSpec = std::variant<Dense, Conv2d, MaxPool2d, PRelu>;

struct NetworkSpec {
    Shape input_shape;
    std::vector<LayerSpec> layers;
    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline double prelu_apply(double x, double slope) noexcept { return x >= 0.0 ? x : slope * x; }

/// Initial value for PReLU slopes (the conventional 0.25).
inline constexpr double kPReluInitialSlope = 0.25;

namespace detail {

struct BuiltLayer {
    LayerSpec spec;
    Shape in;
    Shape out;
    std::size_t offset = 0;
    std::size_t weights = 0;
    std::size_t biases = 0;
};

inline std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace detail

/// Scratch buffers reused across forward calls.
struct Workspace {
    std::vector<double> a;
    std::vector<double> b;
};

/// Inference-ready network. Immutable after build; forward may run concurrently.
class Network {
public:
    explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
        Shape shape = spec_.input_shape;
        if (shape.size() == 0) throw BuildError(0, "input shape has a zero dimension");
        if (spec_.layers.empty()) throw BuildError(0, "network has no layers");
        std::size_t offset = 0;
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            detail::BuiltLayer built{spec_.layers[i], shape, shape, offset, 0, 0};
            std::visit([&](const auto& layer) { plan(i, layer, built); }, spec_.layers[i]);
            offset += built.weights + built.biases;
            shape = built.out;
            layers_.push_back(built);
        }
        parameter_count_ = offset;
        output_shape_ = shape;
    }

    [[nodiscard]] const NetworkSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return parameter_count_; }
    [[nodiscard]] Shape input_shape() const noexcept { return spec_.input_shape; }
    [[nodiscard]] Shape output_shape() const noexcept { return output_shape_; }
    [[nodiscard]] std::size_t input_size() const noexcept { return spec_.input_shape.size(); }
    [[nodiscard]] std::size_t output_size() const noexcept { return output_shape_.size(); }

    /// Xavier-normal weights and biases per layer (fans taken from the layer
    /// geometry); PReLU slopes start at kPReluInitialSlope.
    [[nodiscard]] ParameterVector initialize(RngHandle rng) const {
        ParameterVector params(parameter_count_);
        auto engine = rng.engine();
        for (const auto& layer : layers_) {
            std::span<double> block(params.data() + layer.offset, layer.weights + layer.biases);
            if (const auto* d = std::get_if<Dense>(&layer.spec)) {
                xavier_normal_fill(block, d->in_features, d->out_features, engine);
            } else if (const auto* c = std::get_if<Conv2d>(&layer.spec)) {
                const std::size_t area = c->kernel_size * c->kernel_size;
                xavier_normal_fill(block, c->in_channels * area, c->out_channels * area, engine);
            } else if (std::holds_alternative<PRelu>(layer.spec)) {
                std::fill(block.begin(), block.end(), kPReluInitialSlope);
            }
        }
        return params;
    }

    void forward(std::span<const double> params, std::span<const double> input, Workspace& ws,
                 std::vector<double>& output) const {
        if (params.size() != parameter_count_) {
            throw DimensionError("forward: expected " + std::to_string(parameter_count_) + " parameters, got " +
                                 std::to_string(params.size()));
        }
        if (input.size() != input_size()) {
            throw DimensionError("forward: expected input of size " + std::to_string(input_size()) + ", got " +
                                 std::to_string(input.size()));
        }
        ws.a.assign(input.begin(), input.end());
        for (const auto& layer : layers_) {
            ws.b.assign(layer.out.size(), 0.0);
            const auto p = params.subspan(layer.offset, layer.weights + layer.biases);
            std::visit([&](const auto& spec) { apply(spec, layer, p, ws.a, ws.b); }, layer.spec);
            std::swap(ws.a, ws.b);
        }
        output.assign(ws.a.begin(), ws.a.end());
    }

    [[nodiscard]] std::vector<double> forward(std::span<const double> params, std::span<const double> input) const {
        Workspace ws;
        std::vector<double> out;
        forward(params, input, ws, out);
        return out;
    }

private:
    void plan(std::size_t i, const Dense& d, detail::BuiltLayer& b) const {
        if (d.in_features == 0 || d.out_features == 0) throw BuildError(i, "dense sizes must be >= 1");
        if (b.in.size() != d.in_features) {
            throw BuildError(i, "dense expects " + std::to_string(d.in_features) + " inputs, previous layer yields " +
                                    std::to_string(b.in.size()));
        }
        b.weights = d.in_features * d.out_features;
        b.biases = d.out_features;
        b.out = Shape::flat(d.out_features);
    }

    void plan(std::size_t i, const Conv2d& c, detail::BuiltLayer& b) const {
        if (c.in_channels == 0 || c.out_channels == 0 || c.kernel_size == 0 || c.stride == 0) {
            throw BuildError(i, "conv2d sizes must be >= 1");
        }
        if (b.in.channels != c.in_channels) {
            throw BuildError(i, "conv2d expects " + std::to_string(c.in_channels) + " channels, got " +
                                    std::to_string(b.in.channels));
        }
        if (b.in.height + 2 * c.padding < c.kernel_size || b.in.width + 2 * c.padding < c.kernel_size) {
            throw BuildError(i, "conv2d kernel larger than padded input");
        }
        b.weights = c.out_channels * c.in_channels * c.kernel_size * c.kernel_size;
        b.biases = c.out_channels;
        b.out = {c.out_channels, detail::conv_extent(b.in.height, c.kernel_size, c.stride, c.padding),
                 detail::conv_extent(b.in.width, c.kernel_size, c.stride, c.padding)};
    }

    void plan(std::size_t i, const MaxPool2d& m, detail::BuiltLayer& b) const {
        if (m.window == 0 || m.stride == 0) throw BuildError(i, "maxpool2d sizes must be >= 1");
        if (b.in.height < m.window || b.in.width < m.window) throw BuildError(i, "maxpool2d window larger than input");
        b.out = {b.in.channels, detail::conv_extent(b.in.height, m.window, m.stride, 0),
                 detail::conv_extent(b.in.width, m.window, m.stride, 0)};
    }

    void plan(std::size_t i, const PRelu& r, detail::BuiltLayer& b) const {
        if (r.num_slopes == 0) throw BuildError(i, "prelu needs at least one slope");
        if (r.num_slopes != 1 && r.num_slopes != b.in.channels) {
            throw BuildError(i, "prelu slopes must be 1 or match " + std::to_string(b.in.channels) + " channels");
        }
        b.weights = r.num_slopes;
    }

    static void apply(const Dense& d, const detail::BuiltLayer&, std::span<const double> p,
                      const std::vector<double>& in, std::vector<double>& out) {
        const double* w = p.data();
        const double* bias = w + d.in_features * d.out_features;
        for (std::size_t o = 0; o < d.out_features; ++o) {
            const double* row = w + o * d.in_features;
            double acc = bias[o];
            for (std::size_t k = 0; k < d.in_features; ++k) acc += row[k] * in[k];
            out[o] = acc;
        }
    }

    static void apply(const Conv2d& c, const detail::BuiltLayer& l, std::span<const double> p,
                      const std::vector<double>& in, std::vector<double>& out) {
        const std::size_t k = c.kernel_size;
        const auto ih = static_cast<std::ptrdiff_t>(l.in.height);
        const auto iw = static_cast<std::ptrdiff_t>(l.in.width);
        const double* w = p.data();
        const double* bias = w + c.out_channels * c.in_channels * k * k;
        for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
            for (std::size_t oy = 0; oy < l.out.height; ++oy) {
                for (std::size_t ox = 0; ox < l.out.width; ++ox) {
                    double acc = bias[oc];
                    const auto y0 = static_cast<std::ptrdiff_t>(oy * c.stride) - static_cast<std::ptrdiff_t>(c.padding);
                    const auto x0 = static_cast<std::ptrdiff_t>(ox * c.stride) - static_cast<std::ptrdiff_t>(c.padding);
                    for (std::size_t ic = 0; ic < c.in_channels; ++ic) {
                        const double* kern = w + ((oc * c.in_channels + ic) * k) * k;
                        const double* plane = in.data() + ic * l.in.height * l.in.width;
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            const auto y = y0 + static_cast<std::ptrdiff_t>(ky);
                            if (y < 0 || y >= ih) continue;
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const auto x = x0 + static_cast<std::ptrdiff_t>(kx);
                                if (x < 0 || x >= iw) continue;
                                acc += kern[ky * k + kx] * plane[y * iw + x];
                            }
                        }
                    }
                    out[(oc * l.out.height + oy) * l.out.width + ox] = acc;
                }
            }
        }
    }

    static void apply(const MaxPool2d& m, const detail::BuiltLayer& l, std::span<const double>,
                      const std::vector<double>& in, std::vector<double>& out) {
        for (std::size_t ch = 0; ch < l.out.channels; ++ch) {
            const double* plane = in.data() + ch * l.in.height * l.in.width;
            for (std::size_t oy = 0; oy < l.out.height; ++oy) {
                for (std::size_t ox = 0; ox < l.out.width; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (std::size_t ky = 0; ky < m.window; ++ky) {
                        for (std::size_t kx = 0; kx < m.window; ++kx) {
                            best = std::max(best, plane[(oy * m.stride + ky) * l.in.width + ox * m.stride + kx]);
                        }
                    }
                    out[(ch * l.out.height + oy) * l.out.width + ox] = best;
                }
            }
        }
    }

    static void apply(const PRelu& r, const detail::BuiltLayer& l, std::span<const double> p,
                      const std::vector<double>& in, std::vector<double>& out) {
        const std::size_t plane = l.in.height * l.in.width;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double slope = r.num_slopes == 1 ? p[0] : p[i / plane];
            out[i] = prelu_apply(in[i], slope);
        }
    }

    NetworkSpec spec_;
    std::vector<detail::BuiltLayer> layers_;
    std::size_t parameter_count_ = 0;
    Shape output_shape_;
};

inline Network build(NetworkSpec spec) { return Network(std::move(spec)); }

/// Mean softmax cross-entropy over a row-major [batch][classes] logit block.
inline double cross_entropy(std::span<const double> logits, std::size_t num_classes,
                            std::span<const std::size_t> labels) {
    if (labels.empty()) throw ArgumentError("cross_entropy: empty batch");
    if (num_classes == 0 || logits.size() != labels.size() * num_classes) {
        throw DimensionError("cross_entropy: logits size does not match batch x classes");
    }
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= num_classes) throw ArgumentError("cross_entropy: label out of range");
        const auto row = logits.subspan(r * num_classes, num_classes);
        const double peak = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double z : row) sum += std::exp(z - peak);
        total += std::log(sum) + peak - row[labels[r]];
    }
    return total / static_cast<double>(labels.size());
}

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

inline double accuracy(std::span<const double> logits, std::size_t num_classes, std::span<const std::size_t> labels) {
    if (labels.empty()) throw ArgumentError("accuracy: empty batch");
    if (num_classes == 0 || logits.size() != labels.size() * num_classes) {
        throw DimensionError("accuracy: logits size does not match batch x classes");
    }
    std::size_t hits = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (argmax(logits.subspan(r * num_classes, num_classes)) == labels[r]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

/// Labelled samples of uniform shape, stored contiguously.
struct Dataset {
    Shape sample_shape;
    std::vector<double> features;  // [count][sample_shape.size()]
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::span<const double> input(std::size_t i) const {
        const std::size_t n = sample_shape.size();
        return std::span<const double>(features).subspan(i * n, n);
    }

    void validate() const {
        if (num_classes == 0) throw ArgumentError("dataset: num_classes must be >= 1");
        if (features.size() != labels.size() * sample_shape.size()) {
            throw DimensionError("dataset: feature block does not match label count");
        }
        for (auto l : labels) {
            if (l >= num_classes) throw ArgumentError("dataset: label " + std::to_string(l) + " out of range");
        }
    }
};

// JSON form: {"input_shape": [c, h, w] | n, "layers": [{"kind": "dense", ...}, ...]}

inline void to_json(nlohmann::json& j, const LayerSpec& layer) {
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Dense>) {
                j = {{"kind", "dense"}, {"in_features", l.in_features}, {"out_features", l.out_features}};
            } else if constexpr (std::is_same_v<T, Conv2d>) {
                j = {{"kind", "conv2d"},          {"in_channels", l.in_channels}, {"out_channels", l.out_channels},
                     {"kernel_size", l.kernel_size}, {"stride", l.stride},           {"padding", l.padding}};
            } else if constexpr (std::is_same_v<T, MaxPool2d>) {
                j = {{"kind", "maxpool2d"}, {"window", l.window}, {"stride", l.stride}};
            } else {
                j = {{"kind", "prelu"}, {"num_slopes", l.num_slopes}};
            }
        },
        layer);
}

inline void from_json(const nlohmann::json& j, LayerSpec& layer) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "dense") {
        layer = Dense{j.at("in_features").get<std::size_t>(), j.at("out_features").get<std::size_t>()};
    } else if (kind == "conv2d") {
        layer = Conv2d{j.at("in_channels").get<std::size_t>(), j.at("out_channels").get<std::size_t>(),
                       j.at("kernel_size").get<std::size_t>(), j.value("stride", std::size_t{1}),
                       j.value("padding", std::size_t{0})};
    } else if (kind == "maxpool2d") {
        layer = MaxPool2d{j.at("window").get<std::size_t>(), j.value("stride", j.at("window").get<std::size_t>())};
    } else if (kind == "prelu") {
        layer = PRelu{j.value("num_slopes", std::size_t{1})};
    } else {
        throw ArgumentError("unknown layer kind '" + kind + "'");
    }
}

inline void to_json(nlohmann::json& j, const NetworkSpec& spec) {
    j = {{"input_shape", {spec.input_shape.channels, spec.input_shape.height, spec.input_shape.width}},
         {"layers", spec.layers}};
}

inline void from_json(const nlohmann::json& j, NetworkSpec& spec) {
    const auto& shape = j.at("input_shape");
    if (shape.is_number_unsigned()) {
        spec.input_shape = Shape::flat(shape.get<std::size_t>());
    } else {
        if (!shape.is_array() || shape.size() != 3) throw ArgumentError("input_shape must be n or [c, h, w]");
        spec.input_shape = {shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), shape[2].get<std::size_t>()};
    }
    spec.layers = j.at("layers").get<std::vector<LayerSpec>>();
}

/// dense(2 -> hidden) + prelu + dense(hidden -> 2): the network that maps a
/// frozen origin to a point on a 2-D benchmark surface.
inline NetworkSpec task1_network_spec(std::size_t hidden = 128) {
    return {Shape::flat(2), {Dense{2, hidden}, PRelu{1}, Dense{hidden, 2}}};
}

/// dense(inputs -> hidden) + prelu + dense(hidden -> classes) over a flattened image.
inline NetworkSpec dense_classifier_spec(Shape input, std::size_t hidden, std::size_t classes) {
    return {input, {Dense{input.size(), hidden}, PRelu{1}, Dense{hidden, classes}}};
}

/// Four 3x3 convolutions (32, 64, 128, 128 channels) with one 2x2 stride-2
/// max pool after the second, a 512-unit fully connected layer and 10 logits.
inline NetworkSpec mnist_cnn_spec() {
    return {Shape{1, 28, 28},
            {Conv2d{1, 32, 3}, PRelu{1}, Conv2d{32, 64, 3}, PRelu{1}, MaxPool2d{2, 2}, Conv2d{64, 128, 3}, PRelu{1},
             Conv2d{128, 128, 3}, PRelu{1}, Dense{128 * 8 * 8, 512}, PRelu{1}, Dense{512, 10}}};
}

}  // namespace msn

#endif  // MSN_NETWORK_HPP
