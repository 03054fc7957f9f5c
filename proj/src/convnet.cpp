#include "ocsim/convnet.hpp"

#include "ocsim/errors.hpp"
#include "ocsim/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ocsim::convnet {

namespace {

std::uint32_t read_u32_be(std::istream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& f, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

} // namespace

IdxImages read_idx_images(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open: " + path);
    const std::uint32_t magic = read_u32_be(f, path);
    if (magic != 0x803u)
        throw ConfigError("bad image magic " + hex32(magic) + " (want 0x00000803) in " + path);
    IdxImages images;
    images.count = static_cast<int>(read_u32_be(f, path));
    images.rows = static_cast<int>(read_u32_be(f, path));
    images.cols = static_cast<int>(read_u32_be(f, path));
    if (images.count < 0 || images.rows <= 0 || images.cols <= 0)
        throw ConfigError("bad IDX image dimensions in " + path);
    const std::size_t n = static_cast<std::size_t>(images.count) *
                          static_cast<std::size_t>(images.rows) *
                          static_cast<std::size_t>(images.cols);
    images.pixels.resize(n);
    if (!f.read(reinterpret_cast<char*>(images.pixels.data()), static_cast<std::streamsize>(n)))
        throw ConfigError("truncated IDX image data in " + path);
    return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open: " + path);
    const std::uint32_t magic = read_u32_be(f, path);
    if (magic != 0x801u)
        throw ConfigError("bad label magic " + hex32(magic) + " (want 0x00000801) in " + path);
    const auto count = static_cast<std::size_t>(read_u32_be(f, path));
    std::vector<std::uint8_t> labels(count);
    if (!f.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count)))
        throw ConfigError("truncated IDX label data in " + path);
    return labels;
}

void write_idx_images(const std::string& path, const IdxImages& images) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    write_u32_be(f, 0x803u);
    write_u32_be(f, static_cast<std::uint32_t>(images.count));
    write_u32_be(f, static_cast<std::uint32_t>(images.rows));
    write_u32_be(f, static_cast<std::uint32_t>(images.cols));
    f.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    write_u32_be(f, 0x801u);
    write_u32_be(f, static_cast<std::uint32_t>(labels.size()));
    f.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

void Dataset::validate() const {
    if (images.size() != labels.size()) throw ShapeError("image/label count mismatch");
    if (class_count < 2) throw InvalidParameter("need at least two classes");
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count)
            throw ConfigError("label " + std::to_string(labels[i]) + " outside 0.." +
                              std::to_string(class_count - 1));
        if (images[i].minCoeff() < 0.0 || images[i].maxCoeff() > 1.0)
            throw InvalidParameter("image values must lie in [0, 1]");
    }
}

Dataset load_digits(const std::string& images_path, const std::string& labels_path,
                    const std::string& split_tag, int limit) {
    const IdxImages raw = read_idx_images(images_path);
    const std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
    if (static_cast<int>(labels.size()) != raw.count)
        throw ConfigError("IDX pair mismatch: " + std::to_string(raw.count) + " images, " +
                          std::to_string(labels.size()) + " labels");
    Dataset set;
    set.split_tag = split_tag;
    const int keep = limit < 0 ? raw.count : std::min(limit, raw.count);
    set.images.reserve(static_cast<std::size_t>(keep));
    set.labels.reserve(static_cast<std::size_t>(keep));
    const std::size_t stride =
        static_cast<std::size_t>(raw.rows) * static_cast<std::size_t>(raw.cols);
    for (int i = 0; i < keep; ++i) {
        Eigen::MatrixXd img(raw.rows, raw.cols);
        const std::uint8_t* px = raw.pixels.data() + static_cast<std::size_t>(i) * stride;
        for (int r = 0; r < raw.rows; ++r)
            for (int c = 0; c < raw.cols; ++c)
                img(r, c) = px[static_cast<std::size_t>(r) * raw.cols + c] / 255.0;
        set.images.push_back(std::move(img));
        set.labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    set.validate();
    return set;
}

Eigen::MatrixXd correlate2d_valid(const Eigen::MatrixXd& image, const Eigen::MatrixXd& kernel) {
    const auto kh = kernel.rows(), kw = kernel.cols();
    if (image.rows() < kh || image.cols() < kw)
        throw ShapeError("image smaller than the kernel");
    Eigen::MatrixXd out(image.rows() - kh + 1, image.cols() - kw + 1);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            out(i, j) = (image.block(i, j, kh, kw).array() * kernel.array()).sum();
    return out;
}

Eigen::MatrixXd avgpool2(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows() / 2, m.cols() / 2);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            out(i, j) = 0.25 * (m(2 * i, 2 * j) + m(2 * i + 1, 2 * j) + m(2 * i, 2 * j + 1) +
                                m(2 * i + 1, 2 * j + 1));
    return out;
}

std::vector<Conv2dTask> decompose_conv2d(const Eigen::MatrixXd& kernel) {
    if (kernel.rows() < 1 || kernel.cols() < 1) throw ShapeError("empty kernel");
    std::vector<Conv2dTask> tasks;
    tasks.reserve(static_cast<std::size_t>(kernel.rows()));
    for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
        Conv2dTask task;
        task.kernel_row = static_cast<int>(r);
        task.row_kernel.weights = kernel.row(r).transpose().array();
        tasks.push_back(std::move(task));
    }
    return tasks;
}

Eigen::MatrixXd conv2d_via_opus(const std::vector<opu::OpuConfig>& pool,
                                const Eigen::MatrixXd& image, const Eigen::MatrixXd& kernel,
                                opu::OpuMode mode, std::uint64_t seed) {
    if (pool.empty()) throw CapacityError("no processing units in the pool", 1);
    const std::vector<Conv2dTask> tasks = decompose_conv2d(kernel);
    if (image.rows() < kernel.rows() || image.cols() < kernel.cols())
        throw ShapeError("image smaller than the kernel");
    const auto h_out = image.rows() - kernel.rows() + 1;
    const auto w_out = image.cols() - kernel.cols() + 1;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h_out, w_out);
    std::uint64_t t = 0;
    for (Eigen::Index i = 0; i < h_out; ++i) {
        for (const Conv2dTask& task : tasks) {
            const std::uint64_t task_seed = derive_seed(seed, t);
            opu::OpuConfig unit = pool[static_cast<std::size_t>(t % pool.size())];
            unit.mode = mode;
            ++t;
            if (task.row_kernel.weights.abs().maxCoeff() == 0.0) continue; // dark page
            const Eigen::ArrayXd row =
                image.row(i + task.kernel_row).transpose().array();
            out.row(i) += opu::opu_correlate_row(unit, row, task.row_kernel, task_seed)
                              .matrix()
                              .transpose();
        }
    }
    return out;
}

Eigen::MatrixXd noisy_quantize(const Eigen::MatrixXd& tensor, int bits, std::uint64_t seed) {
    if (bits < 1 || bits > 30) throw InvalidParameter("precision bits must be in 1..30");
    const double range = tensor.maxCoeff() - tensor.minCoeff();
    if (range == 0.0) return tensor;
    const double sigma = range * std::ldexp(1.0, -bits);
    NoiseStream stream(seed);
    Eigen::MatrixXd out = tensor;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            out(i, j) += stream.gaussian(sigma);
    return out;
}

void Conv2dLayer::validate() const {
    if (in_channels < 1 || out_channels < 1) throw InvalidParameter("bad channel counts");
    if (kernel_size < 1) throw InvalidParameter("bad kernel size");
    if (kernels.size() != static_cast<std::size_t>(in_channels) * out_channels)
        throw ShapeError("layer needs out*in kernels");
    for (const auto& k : kernels)
        if (k.rows() != kernel_size || k.cols() != kernel_size)
            throw ShapeError("kernel size mismatch");
    if (bias.size() != out_channels) throw ShapeError("one bias per output channel required");
}

ExecutionMode ExecutionMode::floating() { return ExecutionMode{}; }

ExecutionMode ExecutionMode::quantized(int bits, std::uint64_t seed) {
    ExecutionMode m;
    m.kind = Kind::NoisyQuantized;
    m.bits = bits;
    m.seed = seed;
    return m;
}

ExecutionMode ExecutionMode::on_opus(const std::vector<opu::OpuConfig>* pool,
                                     std::uint64_t seed) {
    ExecutionMode m;
    m.kind = Kind::Opu;
    m.opu_pool = pool;
    m.seed = seed;
    return m;
}

std::vector<Eigen::MatrixXd> layer_forward(const Conv2dLayer& layer,
                                           const std::vector<Eigen::MatrixXd>& input,
                                           const ExecutionMode& mode) {
    layer.validate();
    if (static_cast<int>(input.size()) != layer.in_channels)
        throw ShapeError("layer expects " + std::to_string(layer.in_channels) + " channels, got " +
                         std::to_string(input.size()));
    if (mode.kind == ExecutionMode::Kind::Opu && (mode.opu_pool == nullptr || mode.opu_pool->empty()))
        throw ConfigError("photonic execution mode has no unit pool");

    std::vector<Eigen::MatrixXd> output;
    output.reserve(static_cast<std::size_t>(layer.out_channels));
    for (int oc = 0; oc < layer.out_channels; ++oc) {
        Eigen::MatrixXd acc;
        for (int ic = 0; ic < layer.in_channels; ++ic) {
            const std::uint64_t pair_seed =
                derive_seed(mode.seed, 1000 + static_cast<std::uint64_t>(oc) * layer.in_channels + ic);
            Eigen::MatrixXd part;
            switch (mode.kind) {
            case ExecutionMode::Kind::Float:
                part = correlate2d_valid(input[static_cast<std::size_t>(ic)], layer.kernel(oc, ic));
                break;
            case ExecutionMode::Kind::NoisyQuantized:
                part = correlate2d_valid(
                    input[static_cast<std::size_t>(ic)],
                    noisy_quantize(layer.kernel(oc, ic), mode.bits, pair_seed));
                break;
            case ExecutionMode::Kind::Opu:
                part = conv2d_via_opus(*mode.opu_pool, input[static_cast<std::size_t>(ic)],
                                       layer.kernel(oc, ic), mode.opu_pool->front().mode, pair_seed);
                break;
            }
            acc = ic == 0 ? std::move(part) : Eigen::MatrixXd(acc + part);
        }
        acc.array() += layer.bias[oc];
        if (mode.kind == ExecutionMode::Kind::NoisyQuantized)
            acc = noisy_quantize(acc, mode.bits, derive_seed(mode.seed, 2000 + static_cast<std::uint64_t>(oc)));
        if (layer.relu) acc = acc.cwiseMax(0.0);
        output.push_back(std::move(acc));
    }
    return output;
}

int ToyCnn::feature_count() const {
    const int conv_size = input_size - conv.kernel_size + 1;
    const int pooled = conv_size / pool;
    return conv.out_channels * pooled * pooled;
}

void ToyCnn::validate() const {
    conv.validate();
    if (pool < 1) throw InvalidParameter("bad pool size");
    if (input_size <= conv.kernel_size) throw InvalidParameter("input smaller than the kernel");
    if (dense_w.rows() != class_count || dense_w.cols() != feature_count())
        throw ShapeError("dense weights do not match the feature count");
    if (dense_b.size() != class_count) throw ShapeError("dense bias size mismatch");
}

Eigen::VectorXd flatten_features(const std::vector<Eigen::MatrixXd>& maps) {
    Eigen::Index total = 0;
    for (const auto& m : maps) total += m.size();
    Eigen::VectorXd f(total);
    Eigen::Index at = 0;
    for (const auto& m : maps) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f[at++] = m(r, c);
    }
    return f;
}

Eigen::VectorXd cnn_logits(const ToyCnn& model, const Eigen::MatrixXd& image,
                           const ExecutionMode& mode) {
    model.validate();
    if (image.rows() != model.input_size || image.cols() != model.input_size)
        throw ShapeError("image size does not match the model input");
    std::vector<Eigen::MatrixXd> maps = layer_forward(model.conv, {image}, mode);
    for (auto& m : maps) m = avgpool2(m);
    Eigen::VectorXd logits = model.dense_w * flatten_features(maps) + model.dense_b;
    // The classifier head is the "rest of the network": finite-precision runs
    // perturb its output like any other layer, which is what makes accuracy
    // actually degrade at low bit depths.
    if (mode.kind == ExecutionMode::Kind::NoisyQuantized)
        logits = noisy_quantize(logits, mode.bits, derive_seed(mode.seed, 3000));
    return logits;
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
    Eigen::VectorXd e = shifted.array().exp();
    return e / e.sum();
}

} // namespace

ToyCnn train_toy_cnn(const Dataset& train, const TrainSettings& settings) {
    train.validate();
    if (train.size() == 0) throw InvalidParameter("empty training set");
    if (settings.epochs < 0 || settings.batch < 1 || !(settings.learning_rate > 0.0))
        throw InvalidParameter("bad training settings");

    ToyCnn model;
    model.input_size = static_cast<int>(train.images.front().rows());
    model.class_count = train.class_count;
    model.conv.in_channels = 1;
    model.conv.out_channels = 8;
    model.conv.kernel_size = 3;
    model.conv.relu = true;

    NoiseStream rng(settings.seed);
    const double conv_bound = std::sqrt(1.0 / 9.0);
    model.conv.kernels.assign(8, Eigen::MatrixXd(3, 3));
    for (auto& k : model.conv.kernels)
        for (Eigen::Index r = 0; r < 3; ++r)
            for (Eigen::Index c = 0; c < 3; ++c)
                k(r, c) = conv_bound * (2.0 * rng.uniform() - 1.0);
    model.conv.bias = Eigen::VectorXd::Zero(8);

    const int features = model.feature_count();
    const double dense_bound = std::sqrt(1.0 / features);
    model.dense_w.resize(model.class_count, features);
    for (Eigen::Index r = 0; r < model.dense_w.rows(); ++r)
        for (Eigen::Index c = 0; c < model.dense_w.cols(); ++c)
            model.dense_w(r, c) = dense_bound * (2.0 * rng.uniform() - 1.0);
    model.dense_b = Eigen::VectorXd::Zero(model.class_count);

    const int conv_size = model.input_size - 2;
    const int pooled = conv_size / 2;
    const int map_px = pooled * pooled;

    std::vector<int> order(static_cast<std::size_t>(train.size()));
    for (int i = 0; i < train.size(); ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < settings.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[rng.index(i + 1)]);

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(settings.batch)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(settings.batch));
            const double inv = 1.0 / static_cast<double>(stop - start);

            std::vector<Eigen::MatrixXd> g_kernels(8, Eigen::MatrixXd::Zero(3, 3));
            Eigen::VectorXd g_conv_b = Eigen::VectorXd::Zero(8);
            Eigen::MatrixXd g_w = Eigen::MatrixXd::Zero(model.dense_w.rows(), model.dense_w.cols());
            Eigen::VectorXd g_b = Eigen::VectorXd::Zero(model.class_count);

            for (std::size_t s = start; s < stop; ++s) {
                const Eigen::MatrixXd& x = train.images[static_cast<std::size_t>(order[s])];
                const int label = train.labels[static_cast<std::size_t>(order[s])];

                std::vector<Eigen::MatrixXd> z(8);
                std::vector<Eigen::MatrixXd> pooled_maps(8);
                for (int oc = 0; oc < 8; ++oc) {
                    z[static_cast<std::size_t>(oc)] =
                        correlate2d_valid(x, model.conv.kernels[static_cast<std::size_t>(oc)]);
                    z[static_cast<std::size_t>(oc)].array() += model.conv.bias[oc];
                    pooled_maps[static_cast<std::size_t>(oc)] =
                        avgpool2(z[static_cast<std::size_t>(oc)].cwiseMax(0.0));
                }
                Eigen::VectorXd f(features);
                for (int oc = 0; oc < 8; ++oc) {
                    const auto& m = pooled_maps[static_cast<std::size_t>(oc)];
                    for (int r = 0; r < pooled; ++r)
                        for (int c = 0; c < pooled; ++c)
                            f[oc * map_px + r * pooled + c] = m(r, c);
                }
                const Eigen::VectorXd logits = model.dense_w * f + model.dense_b;
                Eigen::VectorXd delta = softmax(logits);
                delta[label] -= 1.0;

                g_w += delta * f.transpose();
                g_b += delta;
                const Eigen::VectorXd df = model.dense_w.transpose() * delta;

                for (int oc = 0; oc < 8; ++oc) {
                    Eigen::MatrixXd dz(conv_size, conv_size);
                    dz.setZero();
                    for (int r = 0; r < pooled; ++r)
                        for (int c = 0; c < pooled; ++c) {
                            const double g = df[oc * map_px + r * pooled + c] * 0.25;
                            dz(2 * r, 2 * c) = g;
                            dz(2 * r + 1, 2 * c) = g;
                            dz(2 * r, 2 * c + 1) = g;
                            dz(2 * r + 1, 2 * c + 1) = g;
                        }
                    dz = (z[static_cast<std::size_t>(oc)].array() > 0.0).select(dz, 0.0);
                    g_kernels[static_cast<std::size_t>(oc)] += correlate2d_valid(x, dz);
                    g_conv_b[oc] += dz.sum();
                }
            }

            const double step = settings.learning_rate * inv;
            for (int oc = 0; oc < 8; ++oc) {
                model.conv.kernels[static_cast<std::size_t>(oc)] -= step * g_kernels[static_cast<std::size_t>(oc)];
                model.conv.bias[oc] -= step * g_conv_b[oc];
            }
            model.dense_w -= step * g_w;
            model.dense_b -= step * g_b;
        }
    }
    model.validate();
    return model;
}

EvalResult evaluate_classifier(const ToyCnn& model, const Dataset& test,
                               const ExecutionMode& mode) {
    model.validate();
    test.validate();
    if (test.size() == 0) throw InvalidParameter("empty evaluation set");
    EvalResult result;
    result.confusion = Eigen::MatrixXi::Zero(model.class_count, model.class_count);
    result.count = test.size();
    int hits = 0;
    for (int i = 0; i < test.size(); ++i) {
        ExecutionMode per_image = mode;
        per_image.seed = derive_seed(mode.seed, static_cast<std::uint64_t>(i));
        const Eigen::VectorXd logits =
            cnn_logits(model, test.images[static_cast<std::size_t>(i)], per_image);
        Eigen::Index pred = 0;
        logits.maxCoeff(&pred);
        const int label = test.labels[static_cast<std::size_t>(i)];
        result.confusion(label, static_cast<int>(pred)) += 1;
        if (static_cast<int>(pred) == label) ++hits;
    }
    result.accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
    return result;
}

// --- model container ----------------------------------------------------------

namespace {

constexpr char kModelMagic[4] = {'O', 'C', 'N', 'N'};
constexpr std::uint32_t kModelVersion = 1;

void write_u32_le(std::ostream& f, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("truncated model file: " + path);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void write_doubles(std::ostream& f, const double* data, std::size_t n) {
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& f, double* data, std::size_t n, const std::string& path) {
    if (!f.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double))))
        throw ConfigError("truncated model tensors in " + path);
}

} // namespace

void save_model(const ToyCnn& model, const std::string& path) {
    model.validate();
    nlohmann::json header;
    header["format"] = "ocsim-model";
    header["version"] = kModelVersion;
    header["input_size"] = model.input_size;
    header["pool"] = model.pool;
    header["class_count"] = model.class_count;
    header["conv"] = {{"in", model.conv.in_channels},
                      {"out", model.conv.out_channels},
                      {"kernel_size", model.conv.kernel_size},
                      {"relu", model.conv.relu}};
    header["tensors"] = nlohmann::json::array(
        {{{"name", "conv.kernels"},
          {"shape", {model.conv.out_channels, model.conv.in_channels, model.conv.kernel_size,
                     model.conv.kernel_size}}},
         {{"name", "conv.bias"}, {"shape", {model.conv.out_channels}}},
         {{"name", "dense.weight"}, {"shape", {model.class_count, model.feature_count()}}},
         {{"name", "dense.bias"}, {"shape", {model.class_count}}}});
    const std::string head = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    f.write(kModelMagic, 4);
    write_u32_le(f, kModelVersion);
    write_u32_le(f, static_cast<std::uint32_t>(head.size()));
    f.write(head.data(), static_cast<std::streamsize>(head.size()));

    for (const auto& k : model.conv.kernels)
        for (Eigen::Index r = 0; r < k.rows(); ++r)
            for (Eigen::Index c = 0; c < k.cols(); ++c) {
                const double v = k(r, c);
                write_doubles(f, &v, 1);
            }
    write_doubles(f, model.conv.bias.data(), static_cast<std::size_t>(model.conv.bias.size()));
    for (Eigen::Index r = 0; r < model.dense_w.rows(); ++r)
        for (Eigen::Index c = 0; c < model.dense_w.cols(); ++c) {
            const double v = model.dense_w(r, c);
            write_doubles(f, &v, 1);
        }
    write_doubles(f, model.dense_b.data(), static_cast<std::size_t>(model.dense_b.size()));
}

ToyCnn load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
        throw ConfigError("not a model container: " + path);
    const std::uint32_t version = read_u32_le(f, path);
    if (version != kModelVersion)
        throw ConfigError("unsupported model version " + std::to_string(version) + " in " + path);
    const std::uint32_t head_len = read_u32_le(f, path);
    std::string head(head_len, '\0');
    if (!f.read(head.data(), head_len)) throw ConfigError("truncated model header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad model header in " + path + ": " + e.what());
    }
    if (header.value("format", "") != "ocsim-model")
        throw ConfigError("unknown model format in " + path);

    ToyCnn model;
    model.input_size = header.at("input_size").get<int>();
    model.pool = header.at("pool").get<int>();
    model.class_count = header.at("class_count").get<int>();
    model.conv.in_channels = header.at("conv").at("in").get<int>();
    model.conv.out_channels = header.at("conv").at("out").get<int>();
    model.conv.kernel_size = header.at("conv").at("kernel_size").get<int>();
    model.conv.relu = header.at("conv").at("relu").get<bool>();

    const int k = model.conv.kernel_size;
    model.conv.kernels.assign(
        static_cast<std::size_t>(model.conv.in_channels) * model.conv.out_channels,
        Eigen::MatrixXd(k, k));
    for (auto& ker : model.conv.kernels)
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c) read_doubles(f, &ker(r, c), 1, path);
    model.conv.bias.resize(model.conv.out_channels);
    read_doubles(f, model.conv.bias.data(), static_cast<std::size_t>(model.conv.bias.size()), path);
    model.dense_w.resize(model.class_count, model.feature_count());
    for (Eigen::Index r = 0; r < model.dense_w.rows(); ++r)
        for (Eigen::Index c = 0; c < model.dense_w.cols(); ++c)
            read_doubles(f, &model.dense_w(r, c), 1, path);
    model.dense_b.resize(model.class_count);
    read_doubles(f, model.dense_b.data(), static_cast<std::size_t>(model.dense_b.size()), path);
    model.validate();
    return model;
}

} // namespace ocsim::convnet
