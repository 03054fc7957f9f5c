#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ocsim/convnet.hpp"
#include "ocsim/errors.hpp"
#include "ocsim/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

using namespace ocsim;
using namespace ocsim::convnet;

namespace {

const std::string kFixtures = std::string(OCSIM_SOURCE_DIR) + "/fixtures";

Eigen::MatrixXd random_image(NoiseStream& rng, int h, int w) {
    Eigen::MatrixXd m(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) m(r, c) = rng.uniform();
    return m;
}

Eigen::MatrixXd random_kernel2d(NoiseStream& rng, int k) {
    Eigen::MatrixXd m(k, k);
    do {
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c) m(r, c) = 2.0 * rng.uniform() - 1.0;
    } while (m.cwiseAbs().maxCoeff() < 1e-3);
    return m;
}

// Two bright-corner classes, trivially separable.
Dataset make_blobs(int per_class, int size, std::uint64_t seed) {
    Dataset data;
    data.class_count = 2;
    NoiseStream rng(seed);
    for (int i = 0; i < 2 * per_class; ++i) {
        const int label = i % 2;
        Eigen::MatrixXd img(size, size);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const bool lit = label == 0 ? (r < size / 2 && c < size / 2)
                                            : (r >= size / 2 && c >= size / 2);
                img(r, c) = (lit ? 0.7 : 0.1) + 0.2 * rng.uniform();
            }
        data.images.push_back(img);
        data.labels.push_back(label);
    }
    data.split_tag = "blobs";
    return data;
}

const Dataset& digits_train() {
    static const Dataset d = load_digits(kFixtures + "/digits/digits-train-images-idx3-ubyte",
                                         kFixtures + "/digits/digits-train-labels-idx1-ubyte",
                                         "train");
    return d;
}

const Dataset& digits_test() {
    static const Dataset d = load_digits(kFixtures + "/digits/digits-test-images-idx3-ubyte",
                                         kFixtures + "/digits/digits-test-labels-idx1-ubyte",
                                         "test", 1000);
    return d;
}

const ToyCnn& digits_model() {
    static const ToyCnn model = [] {
        TrainSettings settings;
        settings.epochs = 10;
        settings.batch = 16;
        settings.learning_rate = 0.05;
        settings.seed = 1;
        return train_toy_cnn(digits_train(), settings);
    }();
    return model;
}

} // namespace

TEST_CASE("2-D correlation and pooling primitives") {
    NoiseStream rng(3);
    const Eigen::MatrixXd image = random_image(rng, 6, 7);
    Eigen::MatrixXd kernel = random_kernel2d(rng, 3);
    const Eigen::MatrixXd got = correlate2d_valid(image, kernel);
    CHECK(got.rows() == 4);
    CHECK(got.cols() == 5);
    CHECK((got - oracles::xcorr2d_valid(image, kernel)).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::MatrixXd four(2, 2);
    four << 1.0, 2.0, 3.0, 4.0;
    const Eigen::MatrixXd pooled = avgpool2(four);
    CHECK(pooled.rows() == 1);
    CHECK(pooled(0, 0) == doctest::Approx(2.5));
    // Odd trailing row/column is dropped (floor halving).
    CHECK(avgpool2(random_image(rng, 5, 7)).rows() == 2);
    CHECK(avgpool2(random_image(rng, 5, 7)).cols() == 3);
}

TEST_CASE("kernel row decomposition") {
    Eigen::MatrixXd scalar(1, 1);
    scalar << 0.6;
    const auto single = decompose_conv2d(scalar);
    REQUIRE(single.size() == 1);
    CHECK(single[0].row_kernel.weights[0] == doctest::Approx(0.6));
    CHECK(single[0].kernel_row == 0);

    NoiseStream rng(7);
    const Eigen::MatrixXd k3 = random_kernel2d(rng, 3);
    const auto tasks = decompose_conv2d(k3);
    REQUIRE(tasks.size() == 3); // one task per row, one row per unit
    for (int r = 0; r < 3; ++r) {
        CHECK(tasks[static_cast<std::size_t>(r)].kernel_row == r);
        for (int c = 0; c < 3; ++c)
            CHECK(tasks[static_cast<std::size_t>(r)].row_kernel.weights[c] ==
                  doctest::Approx(k3(r, c)));
    }
}

TEST_CASE("row tasks recompose the 2-D correlation exactly") {
    NoiseStream rng(11);
    std::vector<opu::OpuConfig> pool = {opu::default_opu(8, 8), opu::default_opu(8, 8),
                                        opu::default_opu(8, 8)};

    // The worked base case: random 3x3 kernel over a random 8x8 image.
    const Eigen::MatrixXd image = random_image(rng, 8, 8);
    const Eigen::MatrixXd kernel = random_kernel2d(rng, 3);
    const Eigen::MatrixXd got = conv2d_via_opus(pool, image, kernel, opu::OpuMode::Ideal, 1);
    CHECK((got - oracles::xcorr2d_valid(image, kernel)).cwiseAbs().maxCoeff() < 1e-9);

    // Property sweep over kernel sizes.
    for (int k : {1, 2, 3, 5}) {
        for (int trial = 0; trial < 50; ++trial) {
            const int h = k + 1 + static_cast<int>(rng.index(8));
            const int w = k + 1 + static_cast<int>(rng.index(8));
            const Eigen::MatrixXd img = random_image(rng, h, w);
            const Eigen::MatrixXd ker = random_kernel2d(rng, k);
            const Eigen::MatrixXd out = conv2d_via_opus(pool, img, ker, opu::OpuMode::Ideal, 1);
            CHECK((out - oracles::xcorr2d_valid(img, ker)).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("chunked streaming is equivalent for any unit width >= kernel length") {
    NoiseStream rng(13);
    const Eigen::MatrixXd image = random_image(rng, 9, 21);
    const Eigen::MatrixXd kernel = random_kernel2d(rng, 3);
    const Eigen::MatrixXd want = oracles::xcorr2d_valid(image, kernel);
    for (int used : {3, 4, 5, 8}) {
        std::vector<opu::OpuConfig> pool = {opu::default_opu(8, used)};
        const Eigen::MatrixXd got = conv2d_via_opus(pool, image, kernel, opu::OpuMode::Ideal, 1);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("special kernels") {
    NoiseStream rng(17);
    std::vector<opu::OpuConfig> pool = {opu::default_opu(8, 8)};

    Eigen::MatrixXd identity = Eigen::MatrixXd::Zero(3, 3);
    identity(1, 1) = 1.0;
    const Eigen::MatrixXd image = random_image(rng, 7, 7);
    const Eigen::MatrixXd cropped = conv2d_via_opus(pool, image, identity, opu::OpuMode::Ideal, 1);
    CHECK((cropped - image.block(1, 1, 5, 5)).cwiseAbs().maxCoeff() < 1e-9);

    Eigen::MatrixXd edge(3, 3); // zero-sum kernel on a flat image
    edge << 0, 1, 0, 1, -4, 1, 0, 1, 0;
    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(6, 6, 0.5);
    CHECK(conv2d_via_opus(pool, flat, edge, opu::OpuMode::Ideal, 1).cwiseAbs().maxCoeff() < 1e-9);

    CHECK_THROWS_AS(conv2d_via_opus(pool, random_image(rng, 2, 2), edge, opu::OpuMode::Ideal, 1),
                    ShapeError);
}

TEST_CASE("bit-depth noise injection") {
    NoiseStream rng(19);
    Eigen::MatrixXd tensor = random_image(rng, 100, 100);
    tensor(0, 0) = 0.0;
    tensor(99, 99) = 1.0; // pin the range to exactly 1

    const Eigen::MatrixXd fine = noisy_quantize(tensor, 30, 21);
    CHECK((fine - tensor).cwiseAbs().maxCoeff() < 1e-6);

    const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(4, 4, 0.3);
    CHECK((noisy_quantize(constant, 7, 21) - constant).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd big = random_image(rng, 320, 320); // ~1e5 elements
    big(0, 0) = 0.0;
    big(319, 319) = 1.0;
    const Eigen::MatrixXd jittered = noisy_quantize(big, 7, 23);
    const Eigen::ArrayXd residual = (jittered - big).reshaped().array();
    const double std = std::sqrt(residual.square().sum() / (residual.size() - 1.0));
    CHECK(std == doctest::Approx(std::ldexp(1.0, -7)).epsilon(0.05).scale(0.0));

    // Same seed scales one frozen noise field: bits+1 halves every residual.
    const Eigen::MatrixXd coarse = noisy_quantize(tensor, 6, 29);
    const Eigen::MatrixXd finer = noisy_quantize(tensor, 7, 29);
    CHECK(((coarse - tensor) - 2.0 * (finer - tensor)).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(noisy_quantize(tensor, 0, 1), InvalidParameter);
}

TEST_CASE("layer forward modes") {
    // 1x1 unit kernel, no bias, no activation: identity.
    Conv2dLayer unit_layer;
    unit_layer.in_channels = 1;
    unit_layer.out_channels = 1;
    unit_layer.kernel_size = 1;
    unit_layer.kernels = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
    unit_layer.bias = Eigen::VectorXd::Zero(1);
    unit_layer.relu = false;
    NoiseStream rng(23);
    const Eigen::MatrixXd image = random_image(rng, 5, 5);
    const auto out = layer_forward(unit_layer, {image}, ExecutionMode::floating());
    REQUIRE(out.size() == 1);
    CHECK((out[0] - image).cwiseAbs().maxCoeff() < 1e-12);

    // Random multi-channel layer: the unit pipeline in ideal mode is exact.
    Conv2dLayer layer;
    layer.in_channels = 2;
    layer.out_channels = 3;
    layer.kernel_size = 3;
    layer.kernels.resize(6);
    for (auto& k : layer.kernels) k = random_kernel2d(rng, 3);
    layer.bias = Eigen::VectorXd::LinSpaced(3, -0.1, 0.1);
    layer.relu = true;
    const std::vector<Eigen::MatrixXd> input = {random_image(rng, 9, 9), random_image(rng, 9, 9)};

    const auto by_float = layer_forward(layer, input, ExecutionMode::floating());
    std::vector<opu::OpuConfig> pool = {opu::default_opu(8, 8), opu::default_opu(8, 8)};
    const auto by_opu = layer_forward(layer, input, ExecutionMode::on_opus(&pool, 5));
    REQUIRE(by_float.size() == 3);
    REQUIRE(by_opu.size() == 3);
    for (int oc = 0; oc < 3; ++oc)
        CHECK((by_float[static_cast<std::size_t>(oc)] - by_opu[static_cast<std::size_t>(oc)])
                  .cwiseAbs()
                  .maxCoeff() < 1e-9);

    // Channel count mismatch is rejected.
    CHECK_THROWS_AS(layer_forward(layer, {image}, ExecutionMode::floating()), ShapeError);
}

TEST_CASE("toy training separates synthetic blobs") {
    const Dataset blobs = make_blobs(120, 12, 31);
    TrainSettings settings;
    settings.epochs = 5;
    const ToyCnn model = train_toy_cnn(blobs, settings);
    const EvalResult result = evaluate_classifier(model, blobs, ExecutionMode::floating());
    CHECK(result.accuracy >= 0.99);
    CHECK(result.count == blobs.size());
}

TEST_CASE("training determinism and the zero-epoch boundary") {
    const Dataset blobs = make_blobs(60, 12, 37);
    TrainSettings none;
    none.epochs = 0;
    const ToyCnn a = train_toy_cnn(blobs, none);
    const ToyCnn b = train_toy_cnn(blobs, none);
    CHECK((a.dense_w - b.dense_w).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < a.conv.kernels.size(); ++i)
        CHECK((a.conv.kernels[i] - b.conv.kernels[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.conv.bias.cwiseAbs().maxCoeff() == 0.0); // untouched initialization

    TrainSettings five;
    five.epochs = 5;
    const ToyCnn trained1 = train_toy_cnn(blobs, five);
    const ToyCnn trained2 = train_toy_cnn(blobs, five);
    CHECK((trained1.dense_w - trained2.dense_w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((trained1.dense_w - a.dense_w).cwiseAbs().maxCoeff() > 0.0);

    TrainSettings bad;
    bad.epochs = -1;
    CHECK_THROWS_AS(train_toy_cnn(blobs, bad), InvalidParameter);
}

TEST_CASE("model container round trip") {
    const Dataset blobs = make_blobs(60, 12, 41);
    TrainSettings settings;
    settings.epochs = 1;
    const ToyCnn model = train_toy_cnn(blobs, settings);

    const std::string path = "toy_roundtrip.bin";
    save_model(model, path);
    const ToyCnn back = load_model(path);
    CHECK(back.input_size == model.input_size);
    CHECK(back.class_count == model.class_count);
    CHECK(back.conv.out_channels == model.conv.out_channels);
    for (std::size_t i = 0; i < model.conv.kernels.size(); ++i)
        CHECK((back.conv.kernels[i] - model.conv.kernels[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.conv.bias - model.conv.bias).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.dense_w - model.dense_w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.dense_b - model.dense_b).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_model("no_such_model.bin"), ConfigError);
}

TEST_CASE("idx containers round trip and reject corruption") {
    IdxImages images;
    images.count = 3;
    images.rows = 4;
    images.cols = 5;
    images.pixels.resize(60);
    for (std::size_t i = 0; i < images.pixels.size(); ++i)
        images.pixels[i] = static_cast<std::uint8_t>(7 * i + 1);
    const std::string img_path = "idx_roundtrip_images";
    const std::string lbl_path = "idx_roundtrip_labels";
    write_idx_images(img_path, images);
    const IdxImages img_back = read_idx_images(img_path);
    CHECK(img_back.count == 3);
    CHECK(img_back.rows == 4);
    CHECK(img_back.cols == 5);
    CHECK(img_back.pixels == images.pixels);

    const std::vector<std::uint8_t> labels = {0, 5, 9};
    write_idx_labels(lbl_path, labels);
    CHECK(read_idx_labels(lbl_path) == labels);

    // Wrong magic: an image file is not a label file.
    CHECK_THROWS_AS(read_idx_labels(img_path), ConfigError);
    CHECK_THROWS_AS(read_idx_images(lbl_path), ConfigError);
    CHECK_THROWS_AS(read_idx_images("missing-idx-file"), ConfigError);
    std::remove(img_path.c_str());
    std::remove(lbl_path.c_str());
}

TEST_CASE("digit fixture loads into unit-range images") {
    const Dataset& train = digits_train();
    const Dataset& test = digits_test();
    CHECK(train.size() > 700);
    CHECK(test.size() == 1000);
    CHECK(train.images.front().rows() == 28);
    for (int i = 0; i < 10; ++i) {
        CHECK(test.images[static_cast<std::size_t>(i)].maxCoeff() <= 1.0);
        CHECK(test.images[static_cast<std::size_t>(i)].minCoeff() >= 0.0);
    }
    const Dataset limited = load_digits(kFixtures + "/digits/digits-test-images-idx3-ubyte",
                                        kFixtures + "/digits/digits-test-labels-idx1-ubyte",
                                        "test", 50);
    CHECK(limited.size() == 50);
}

TEST_CASE("classifier evaluation bookkeeping") {
    const EvalResult result =
        evaluate_classifier(digits_model(), digits_test(), ExecutionMode::floating());
    CHECK(result.count == 1000);
    // Trace over total is the accuracy, by construction.
    CHECK(static_cast<double>(result.confusion.trace()) / result.count ==
          doctest::Approx(result.accuracy));
    // Row sums equal per-class sample counts.
    std::vector<int> counts(10, 0);
    for (int label : digits_test().labels) ++counts[static_cast<std::size_t>(label)];
    for (int r = 0; r < 10; ++r)
        CHECK(result.confusion.row(r).sum() == counts[static_cast<std::size_t>(r)]);
    CHECK(result.confusion.minCoeff() >= 0);
}

TEST_CASE("high-precision noise injection tracks float accuracy") {
    const double float_acc =
        evaluate_classifier(digits_model(), digits_test(), ExecutionMode::floating()).accuracy;
    CHECK(float_acc >= 0.90);

    double sum12 = 0.0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull})
        sum12 += evaluate_classifier(digits_model(), digits_test(),
                                     ExecutionMode::quantized(12, seed))
                     .accuracy;
    CHECK(std::abs(sum12 / 3.0 - float_acc) <= 0.005);
}

TEST_CASE("coarse bits degrade accuracy") {
    double acc3 = 0.0, acc7 = 0.0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        acc3 += evaluate_classifier(digits_model(), digits_test(),
                                    ExecutionMode::quantized(3, seed))
                    .accuracy;
        acc7 += evaluate_classifier(digits_model(), digits_test(),
                                    ExecutionMode::quantized(7, seed))
                    .accuracy;
    }
    CHECK(acc7 / 3.0 - acc3 / 3.0 >= 0.05);
}
