#pragma once

#include "ocsim/opu.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ocsim::convnet {

// --- IDX dataset container (big-endian, magic 0x803 / 0x801) ----------------

struct IdxImages {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels; // count * rows * cols, row-major
};

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

struct Dataset {
    std::vector<Eigen::MatrixXd> images; // grayscale, values in [0, 1]
    std::vector<int> labels;
    std::string split_tag;
    int class_count = 10;

    int size() const { return static_cast<int>(images.size()); }
    void validate() const;
};

// Loads an IDX image/label pair; limit < 0 keeps everything.
Dataset load_digits(const std::string& images_path, const std::string& labels_path,
                    const std::string& split_tag, int limit = -1);

// --- 2-D convolution ---------------------------------------------------------

// Valid-region 2-D cross correlation (no kernel flip).
Eigen::MatrixXd correlate2d_valid(const Eigen::MatrixXd& image, const Eigen::MatrixXd& kernel);

Eigen::MatrixXd avgpool2(const Eigen::MatrixXd& m);

// One row of a 2-D kernel, ready for a 1-D pass over an image row.
struct Conv2dTask {
    opu::Kernel row_kernel;
    int kernel_row = 0;
};

// K row tasks whose 1-D results, summed with the matching row offsets,
// reproduce the 2-D correlation.
std::vector<Conv2dTask> decompose_conv2d(const Eigen::MatrixXd& kernel);

// Runs the 2-D correlation on a pool of processing units: row tasks are dealt
// round-robin across the pool; every unit runs in the requested mode.
Eigen::MatrixXd conv2d_via_opus(const std::vector<opu::OpuConfig>& pool,
                                const Eigen::MatrixXd& image, const Eigen::MatrixXd& kernel,
                                opu::OpuMode mode, std::uint64_t seed);

// Finite-precision emulation: adds a gaussian perturbation with
// sigma = (max - min) * 2^-bits. The draw depends on the seed only, so a
// sweep over bits scales one fixed noise field.
Eigen::MatrixXd noisy_quantize(const Eigen::MatrixXd& tensor, int bits, std::uint64_t seed);

// --- layers and the toy classifier -------------------------------------------

struct Conv2dLayer {
    int in_channels = 1;
    int out_channels = 8;
    int kernel_size = 3;
    std::vector<Eigen::MatrixXd> kernels; // out*in, indexed kernel(oc, ic)
    Eigen::VectorXd bias;
    bool relu = true;

    const Eigen::MatrixXd& kernel(int oc, int ic) const {
        return kernels[static_cast<std::size_t>(oc * in_channels + ic)];
    }
    Eigen::MatrixXd& kernel(int oc, int ic) {
        return kernels[static_cast<std::size_t>(oc * in_channels + ic)];
    }
    void validate() const;
};

// How a forward pass executes the convolution arithmetic.
struct ExecutionMode {
    enum class Kind { Float, NoisyQuantized, Opu };

    Kind kind = Kind::Float;
    int bits = 8;                                           // NoisyQuantized
    const std::vector<opu::OpuConfig>* opu_pool = nullptr;  // Opu
    std::uint64_t seed = 0;

    static ExecutionMode floating();
    static ExecutionMode quantized(int bits, std::uint64_t seed);
    static ExecutionMode on_opus(const std::vector<opu::OpuConfig>* pool, std::uint64_t seed);
};

std::vector<Eigen::MatrixXd> layer_forward(const Conv2dLayer& layer,
                                           const std::vector<Eigen::MatrixXd>& input,
                                           const ExecutionMode& mode);

// conv(3x3, relu) -> 2x2 average pool -> dense softmax classifier.
struct ToyCnn {
    Conv2dLayer conv;
    int pool = 2;
    Eigen::MatrixXd dense_w; // class_count x feature_count
    Eigen::VectorXd dense_b;
    int input_size = 28;
    int class_count = 10;

    int feature_count() const;
    void validate() const;
};

struct TrainSettings {
    int epochs = 10;
    int batch = 16;
    double learning_rate = 0.05;
    std::uint64_t seed = 7;
};

ToyCnn train_toy_cnn(const Dataset& train, const TrainSettings& settings);

Eigen::VectorXd flatten_features(const std::vector<Eigen::MatrixXd>& maps);
Eigen::VectorXd cnn_logits(const ToyCnn& model, const Eigen::MatrixXd& image,
                           const ExecutionMode& mode);

struct EvalResult {
    double accuracy = 0.0;
    Eigen::MatrixXi confusion; // row = true class, column = prediction
    int count = 0;
};

EvalResult evaluate_classifier(const ToyCnn& model, const Dataset& test,
                               const ExecutionMode& mode);

// Versioned binary model container: magic, little-endian JSON header with the
// architecture and tensor index, then raw little-endian float64 data.
void save_model(const ToyCnn& model, const std::string& path);
ToyCnn load_model(const std::string& path);

} // namespace ocsim::convnet
