#pragma once

#include "ocsim/cluster.hpp"
#include "ocsim/energy.hpp"
#include "ocsim/link.hpp"
#include "ocsim/opu.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ocsim::config {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kFixtureRootEnv = "OCSIM_FIXTURE_ROOT";

struct ConvolveSpec {
    std::string task = "elementary"; // elementary | kernels | first_layer | trace
    std::string op = "add";
    int trials = 4096;
    int levels = 8;
    std::string kernels_path = "kernels_3x3.json";
    std::string image_kind = "synthetic"; // synthetic | dataset
    int image_size = 32;
    int image_index = 0;
    std::string model_path;
    std::string input_path;
    std::string kernel_path;
};

struct SweepSpec {
    std::string axis = "baud"; // baud | rop | bits
    std::vector<double> points;
    int trials = 4096;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    long long payload_bytes = 200000;
};

struct DatasetSpec {
    std::string train_images = "digits/digits-train-images-idx3-ubyte";
    std::string train_labels = "digits/digits-train-labels-idx1-ubyte";
    std::string test_images = "digits/digits-test-images-idx3-ubyte";
    std::string test_labels = "digits/digits-test-labels-idx1-ubyte";
    int limit = -1; // applies to the evaluation split
};

struct TrainSpec {
    int epochs = 10;
    int batch = 16;
    double learning_rate = 0.05;
    std::string model_out = "toy_model.bin";
};

struct EvalSpec {
    std::string model_path = "toy_model.bin";
    bool include_float = true;
    std::vector<int> bits;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
};

struct ClusterSpec {
    int units = 5;
    int jobs = 100;
    std::string job_kind = "conv1d"; // conv1d | conv2d | mixed
    int payload_width = 8;
    int kernel_length = 3;
    int image_size = 16;
    int edges = 1;
    double submit_spread_ns = 0.0;
};

struct ReportSpec {
    std::string kind = "power"; // power | throughput
    std::string power_table_path = "power_table.json";
    std::string bom_path = "bom.json";
    double peak_baud_ghz = 50.0;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    std::string out_dir;
    opu::OpuConfig opu = opu::default_opu();
    link::LinkModel link;
    link::PamConfig pam;
    link::FecConfig fec;
    link::RopBerCurve curve;
    ConvolveSpec convolve;
    SweepSpec sweep;
    DatasetSpec dataset;
    TrainSpec train;
    EvalSpec eval;
    ClusterSpec cluster;
    ReportSpec report;

    std::string source_dir; // directory the scenario file came from
    std::uint64_t hash = 0; // stable hash of the canonical scenario JSON
};

// Strict parse: unknown keys anywhere raise ConfigError naming the JSON path.
Scenario load_scenario(const std::string& path);

// Input files: absolute paths pass through; relative ones resolve against the
// scenario directory, then the fixture-root environment variable.
std::string resolve_input(const Scenario& scenario, const std::string& path);

energy::ComponentPowerTable load_power_table(const std::string& path);
energy::BillOfMaterials load_bom(const std::string& path);

// Named 3x3 kernels from a JSON fixture.
struct NamedKernel {
    std::string name;
    Eigen::MatrixXd kernel;
};
std::vector<NamedKernel> load_kernels(const std::string& path);

std::string calibration_report_json(const opu::CalibrationReport& report);

// Run manifest: scenario identity, tool version, emitted files.
void write_manifest(const std::string& out_dir, const Scenario& scenario,
                    const std::vector<std::string>& outputs, long long duration_ms);

} // namespace ocsim::config
