// Batch front-end: loads a scenario file, runs one named experiment, and
// writes tidy CSV/JSON result files plus a run manifest into the output
// directory.
#include "ocsim/cluster.hpp"
#include "ocsim/config.hpp"
#include "ocsim/convnet.hpp"
#include "ocsim/csv.hpp"
#include "ocsim/energy.hpp"
#include "ocsim/errors.hpp"
#include "ocsim/link.hpp"
#include "ocsim/opu.hpp"
#include "ocsim/photonics.hpp"
#include "ocsim/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace ocsim;
namespace fs = std::filesystem;

struct RunContext {
    config::Scenario scenario;
    fs::path out_dir;
    int parallel = 0; // 0 = one worker per hardware thread
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    std::string path(const std::string& name) {
        outputs.push_back(name);
        return (out_dir / name).string();
    }

    void finish() {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
        config::write_manifest(out_dir.string(), scenario, outputs, ms);
        std::cout << scenario.name << ": " << outputs.size() << " result file(s) in "
                  << out_dir.string() << "\n";
        for (const std::string& o : outputs) std::cout << "  " << o << "\n";
    }
};

// Index-ordered parallel map; results must be written to index-addressed
// slots so the output order never depends on completion order.
void parallel_for(int count, int workers, const std::function<void(int)>& body) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> crew;
    crew.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        crew.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : crew) t.join();
    if (failure) std::rethrow_exception(failure);
}

opu::ElementaryOp op_from_name(const std::string& name) {
    if (name == "multiply") return opu::ElementaryOp::Multiply;
    if (name == "add") return opu::ElementaryOp::Add;
    if (name == "subtract") return opu::ElementaryOp::Subtract;
    if (name == "mac") return opu::ElementaryOp::Mac;
    throw ConfigError("convolve.op must be multiply|add|subtract|mac, got '" + name + "'");
}

// Deterministic test card: smooth waves plus a diagonal ramp, values in [0,1].
Eigen::MatrixXd synthetic_image(int size) {
    if (size < 1) throw ConfigError("convolve.image_size must be >= 1");
    constexpr double kTau = 6.283185307179586;
    Eigen::MatrixXd img(size, size);
    const double denom = std::max(1, size - 1);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            img(r, c) = 0.5 +
                        0.3 * std::sin(kTau * 3.0 * r / size) * std::cos(kTau * 2.0 * c / size) +
                        0.2 * ((r + c) / (2.0 * denom) - 0.5);
    return img;
}

double matrix_rms(const Eigen::MatrixXd& m) {
    return std::sqrt(m.array().square().mean());
}

convnet::Dataset load_split(RunContext& ctx, bool train) {
    const auto& d = ctx.scenario.dataset;
    const std::string images = config::resolve_input(ctx.scenario, train ? d.train_images : d.test_images);
    const std::string labels = config::resolve_input(ctx.scenario, train ? d.train_labels : d.test_labels);
    return convnet::load_digits(images, labels, train ? "train" : "test", d.limit);
}

// Finds a previously trained model near the scenario, or trains one from the
// scenario's dataset/train sections and saves it into the output directory.
convnet::ToyCnn ensure_model(RunContext& ctx, const std::string& model_rel) {
    std::vector<fs::path> candidates;
    fs::path rel(model_rel);
    if (rel.is_absolute()) {
        candidates.push_back(rel);
    } else {
        candidates.push_back(ctx.out_dir / rel);
        if (!ctx.scenario.source_dir.empty())
            candidates.push_back(fs::path(ctx.scenario.source_dir) / rel);
        if (const char* root = std::getenv(config::kFixtureRootEnv))
            candidates.push_back(fs::path(root) / rel);
    }
    for (const fs::path& c : candidates)
        if (fs::exists(c)) return convnet::load_model(c.string());

    convnet::Dataset train = load_split(ctx, true);
    convnet::TrainSettings settings;
    settings.epochs = ctx.scenario.train.epochs;
    settings.batch = ctx.scenario.train.batch;
    settings.learning_rate = ctx.scenario.train.learning_rate;
    settings.seed = ctx.scenario.seed;
    const convnet::ToyCnn model = convnet::train_toy_cnn(train, settings);
    convnet::save_model(model, ctx.path(ctx.scenario.train.model_out));
    return model;
}

// --- convolve ----------------------------------------------------------------

void convolve_elementary(RunContext& ctx) {
    const auto& cv = ctx.scenario.convolve;
    const opu::ElementaryOp op = op_from_name(cv.op);
    const opu::ElementaryBenchmark bench = opu::benchmark_elementary(
        ctx.scenario.opu, op, cv.trials, cv.levels, 3, ctx.scenario.seed);

    csv::Table trace({"trial", "ideal", "noisy", "error"});
    for (int t = 0; t < cv.trials; ++t)
        trace.add_row({csv::format_int(t), csv::format_double(bench.ideal[t]),
                       csv::format_double(bench.computed[t]), csv::format_double(bench.error[t])});
    trace.save(ctx.path("trace.csv"));

    csv::Table stats({"op", "trials", "levels", "baud_ghz", "error_std", "enob_bits"});
    stats.add_row({cv.op, csv::format_int(cv.trials), csv::format_int(cv.levels),
                   csv::format_double(ctx.scenario.opu.baud_ghz),
                   csv::format_double(bench.error_std), csv::format_double(bench.enob)});
    stats.save(ctx.path("stats.csv"));
}

Eigen::MatrixXd convolve_input_image(RunContext& ctx) {
    const auto& cv = ctx.scenario.convolve;
    if (cv.image_kind == "synthetic") return synthetic_image(cv.image_size);
    if (cv.image_kind == "digits") {
        const convnet::Dataset test = load_split(ctx, false);
        if (cv.image_index < 0 || cv.image_index >= test.size())
            throw ConfigError("convolve.image_index outside the test split");
        return test.images[static_cast<std::size_t>(cv.image_index)];
    }
    throw ConfigError("convolve.image_kind must be 'synthetic' or 'digits', got '" + cv.image_kind +
                      "'");
}

void convolve_kernels(RunContext& ctx) {
    const auto& cv = ctx.scenario.convolve;
    const auto kernels =
        config::load_kernels(config::resolve_input(ctx.scenario, cv.kernels_path));
    const Eigen::MatrixXd image = convolve_input_image(ctx);
    const std::vector<opu::OpuConfig> pool{ctx.scenario.opu};

    csv::Table summary({"kernel", "full_scale", "rmse", "rmse_normalized"});
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        const auto& nk = kernels[i];
        const Eigen::MatrixXd oracle = convnet::correlate2d_valid(image, nk.kernel);
        const Eigen::MatrixXd feature = convnet::conv2d_via_opus(
            pool, image, nk.kernel, ctx.scenario.opu.mode, derive_seed(ctx.scenario.seed, i));
        csv::write_matrix(ctx.path(nk.name + "_feature.csv"), feature);
        csv::write_matrix(ctx.path(nk.name + "_oracle.csv"), oracle);
        const double fs = nk.kernel.array().abs().sum();
        const double rmse = matrix_rms(feature - oracle);
        summary.add_row({nk.name, csv::format_double(fs), csv::format_double(rmse),
                         csv::format_double(fs > 0.0 ? rmse / fs : rmse)});
    }
    summary.save(ctx.path("rmse_summary.csv"));
}

void convolve_first_layer(RunContext& ctx) {
    const auto& cv = ctx.scenario.convolve;
    const convnet::ToyCnn model =
        ensure_model(ctx, cv.model_path.empty() ? ctx.scenario.train.model_out : cv.model_path);
    const convnet::Dataset test = load_split(ctx, false);
    if (cv.image_index < 0 || cv.image_index >= test.size())
        throw ConfigError("convolve.image_index outside the test split");
    const Eigen::MatrixXd& image = test.images[static_cast<std::size_t>(cv.image_index)];

    const std::vector<Eigen::MatrixXd> ideal =
        convnet::layer_forward(model.conv, {image}, convnet::ExecutionMode::floating());
    const std::vector<opu::OpuConfig> pool{ctx.scenario.opu};
    const std::vector<Eigen::MatrixXd> noisy = convnet::layer_forward(
        model.conv, {image}, convnet::ExecutionMode::on_opus(&pool, ctx.scenario.seed));

    const Eigen::VectorXd ideal_trace = convnet::flatten_features(ideal);
    const Eigen::VectorXd noisy_trace = convnet::flatten_features(noisy);

    csv::Table trace({"sample", "ideal", "noisy"});
    for (Eigen::Index s = 0; s < ideal_trace.size(); ++s)
        trace.add_row({csv::format_int(s), csv::format_double(ideal_trace[s]),
                       csv::format_double(noisy_trace[s])});
    trace.save(ctx.path("first_layer_trace.csv"));

    const double range = ideal_trace.maxCoeff() - ideal_trace.minCoeff();
    const double rmse = std::sqrt((noisy_trace - ideal_trace).array().square().mean());
    csv::Table stats({"samples", "trace_range", "rmse", "rmse_normalized"});
    stats.add_row({csv::format_int(ideal_trace.size()), csv::format_double(range),
                   csv::format_double(rmse),
                   csv::format_double(range > 0.0 ? rmse / range : rmse)});
    stats.save(ctx.path("first_layer_stats.csv"));
}

void convolve_trace(RunContext& ctx) {
    const auto& cv = ctx.scenario.convolve;
    if (cv.kernel_path.empty()) throw ConfigError("convolve.kernel_path is required for a trace run");
    const Eigen::MatrixXd km = csv::read_matrix(config::resolve_input(ctx.scenario, cv.kernel_path));
    opu::Kernel kernel;
    kernel.weights = km.row(0).transpose().array();

    Eigen::ArrayXd row;
    if (!cv.input_path.empty()) {
        const Eigen::MatrixXd im = csv::read_matrix(config::resolve_input(ctx.scenario, cv.input_path));
        row = im.row(0).transpose().array();
    } else {
        const Eigen::MatrixXd img = synthetic_image(std::max(cv.image_size, kernel.length()));
        row = img.row(0).transpose().array();
    }

    opu::OpuConfig ideal = ctx.scenario.opu;
    ideal.mode = opu::OpuMode::Ideal;
    const Eigen::ArrayXd want = opu::opu_correlate_row(ideal, row, kernel, ctx.scenario.seed);
    const Eigen::ArrayXd got =
        opu::opu_correlate_row(ctx.scenario.opu, row, kernel, ctx.scenario.seed);

    csv::Table trace({"sample", "ideal", "noisy"});
    for (Eigen::Index s = 0; s < want.size(); ++s)
        trace.add_row(
            {csv::format_int(s), csv::format_double(want[s]), csv::format_double(got[s])});
    trace.save(ctx.path("trace.csv"));
}

int run_convolve(RunContext& ctx) {
    const std::string& task = ctx.scenario.convolve.task;
    if (task == "elementary") convolve_elementary(ctx);
    else if (task == "kernels") convolve_kernels(ctx);
    else if (task == "first_layer") convolve_first_layer(ctx);
    else if (task == "trace") convolve_trace(ctx);
    else throw ConfigError("convolve.task must be elementary|kernels|first_layer|trace, got '" +
                           task + "'");
    return 0;
}

// --- sweep -------------------------------------------------------------------

void sweep_baud(RunContext& ctx) {
    const auto& sw = ctx.scenario.sweep;
    const int n = static_cast<int>(sw.points.size());
    const opu::ElementaryOp ops[] = {opu::ElementaryOp::Multiply, opu::ElementaryOp::Add,
                                     opu::ElementaryOp::Subtract, opu::ElementaryOp::Mac};
    std::vector<std::array<double, 4>> enob(static_cast<std::size_t>(n));

    parallel_for(n, ctx.parallel, [&](int i) {
        opu::OpuConfig unit = ctx.scenario.opu;
        unit.mode = opu::OpuMode::Noisy;
        unit.baud_ghz = sw.points[static_cast<std::size_t>(i)];
        for (int j = 0; j < 4; ++j) {
            // One operand/noise stream per op, shared across baud points, so
            // the sweep scales a single noise field and ENOB is monotone.
            const auto bench = opu::benchmark_elementary(
                unit, ops[j], sw.trials, 8, 3, derive_seed(ctx.scenario.seed, 100 + j));
            enob[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = bench.enob;
        }
    });

    csv::Table table({"baud_ghz", "enob_multiply", "enob_add", "enob_subtract", "enob_mac"});
    for (int i = 0; i < n; ++i) {
        const auto& e = enob[static_cast<std::size_t>(i)];
        table.add_row({csv::format_double(sw.points[static_cast<std::size_t>(i)]),
                       csv::format_double(e[0]), csv::format_double(e[1]),
                       csv::format_double(e[2]), csv::format_double(e[3])});
    }
    table.save(ctx.path("enob_vs_baud.csv"));
}

void sweep_rop(RunContext& ctx) {
    const auto& sw = ctx.scenario.sweep;
    const int n = static_cast<int>(sw.points.size());

    // One fixed payload for every sweep point.
    std::vector<std::uint8_t> payload(static_cast<std::size_t>(sw.payload_bytes));
    NoiseStream bytes(derive_seed(ctx.scenario.seed, 0x70ad));
    for (auto& b : payload) b = static_cast<std::uint8_t>(bytes.next_u64() & 0xff);

    struct Row {
        double extra = 0.0, rop = 0.0, model = 0.0, measured = 0.0;
        bool decoded = false, exact = false;
    };
    std::vector<Row> rows(static_cast<std::size_t>(n));

    parallel_for(n, ctx.parallel, [&](int i) {
        link::LinkModel span = ctx.scenario.link;
        span.extra_attenuation_db = sw.points[static_cast<std::size_t>(i)];
        Row r;
        r.extra = span.extra_attenuation_db;
        r.rop = link::received_power_dbm(span);
        r.model = link::ber_from_rop(ctx.scenario.curve, r.rop, ctx.scenario.pam);
        const auto [delivered, stats] =
            link::transmit_payload(payload, span, ctx.scenario.pam, ctx.scenario.fec,
                                   ctx.scenario.curve, derive_seed(ctx.scenario.seed, 1000 + i));
        r.measured = stats.pre_fec_ber;
        r.decoded = stats.decoded;
        r.exact = stats.decoded && delivered == payload;
        rows[static_cast<std::size_t>(i)] = r;
    });

    csv::Table table(
        {"extra_attenuation_db", "rop_dbm", "ber_model", "pre_fec_ber", "decoded", "bit_exact"});
    for (const Row& r : rows)
        table.add_row({csv::format_double(r.extra), csv::format_double(r.rop),
                       csv::format_double(r.model), csv::format_double(r.measured),
                       csv::format_int(r.decoded ? 1 : 0), csv::format_int(r.exact ? 1 : 0)});
    table.save(ctx.path("ber_vs_rop.csv"));
}

void sweep_bits(RunContext& ctx) {
    const auto& sw = ctx.scenario.sweep;
    const int n = static_cast<int>(sw.points.size());
    if (sw.seeds.empty()) throw ConfigError("sweep.seeds must not be empty for the bits axis");
    const convnet::ToyCnn model = ensure_model(ctx, ctx.scenario.eval.model_path);
    const convnet::Dataset test = load_split(ctx, false);

    const int seeds = static_cast<int>(sw.seeds.size());
    std::vector<std::vector<double>> acc(static_cast<std::size_t>(n),
                                         std::vector<double>(static_cast<std::size_t>(seeds), 0.0));
    parallel_for(n, ctx.parallel, [&](int i) {
        const int bits = static_cast<int>(sw.points[static_cast<std::size_t>(i)]);
        for (int j = 0; j < seeds; ++j) {
            // The noise field is seeded per (seed, image) only, so the bits
            // axis rescales one fixed draw.
            const auto mode =
                convnet::ExecutionMode::quantized(bits, sw.seeds[static_cast<std::size_t>(j)]);
            acc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                convnet::evaluate_classifier(model, test, mode).accuracy;
        }
    });

    std::vector<std::string> head{"bits", "mean_accuracy"};
    for (int j = 0; j < seeds; ++j) head.push_back("accuracy_seed" + std::to_string(j));
    csv::Table table(head);
    for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (double a : acc[static_cast<std::size_t>(i)]) mean += a;
        mean /= static_cast<double>(seeds);
        std::vector<std::string> row{
            csv::format_int(static_cast<long long>(sw.points[static_cast<std::size_t>(i)])),
            csv::format_double(mean)};
        for (double a : acc[static_cast<std::size_t>(i)]) row.push_back(csv::format_double(a));
        table.add_row(row);
    }
    table.save(ctx.path("accuracy_vs_bits.csv"));
}

int run_sweep(RunContext& ctx) {
    if (ctx.scenario.sweep.points.empty()) throw ConfigError("sweep.points must not be empty");
    const std::string& axis = ctx.scenario.sweep.axis;
    if (axis == "baud") sweep_baud(ctx);
    else if (axis == "rop") sweep_rop(ctx);
    else if (axis == "bits") sweep_bits(ctx);
    else throw ConfigError("sweep.axis must be baud|rop|bits, got '" + axis + "'");
    return 0;
}

// --- report ------------------------------------------------------------------

void report_power(RunContext& ctx) {
    const auto& rp = ctx.scenario.report;
    const energy::ComponentPowerTable table =
        config::load_power_table(config::resolve_input(ctx.scenario, rp.power_table_path));
    const energy::BillOfMaterials bom =
        config::load_bom(config::resolve_input(ctx.scenario, rp.bom_path));
    const double tops =
        opu::peak_tops(ctx.scenario.opu.awgr.port_count, 3, rp.peak_baud_ghz);

    csv::Table detail({"scope", "component", "count", "unit_mw", "subtotal_mw"});
    csv::Table totals({"scope", "total_mw", "peak_tops", "mw_per_tops"});
    nlohmann::json j;
    j["peak_tops"] = tops;
    j["peak_baud_ghz"] = rp.peak_baud_ghz;
    for (int s = 0; s < energy::kScopeCount; ++s) {
        const auto scope = static_cast<energy::Scope>(s);
        const energy::PowerReport report = energy::total_power(table, bom, scope);
        nlohmann::json& js = j["scopes"][energy::scope_name(scope)];
        for (int c = 0; c < energy::kComponentCount; ++c) {
            const auto comp = static_cast<energy::Component>(c);
            const int count = bom.count(scope, comp);
            if (count == 0) continue;
            detail.add_row({energy::scope_name(scope), energy::component_name(comp),
                            csv::format_int(count), csv::format_double(table[comp]),
                            csv::format_double(report.subtotal_mw[static_cast<std::size_t>(c)])});
            js["components"][energy::component_name(comp)] =
                report.subtotal_mw[static_cast<std::size_t>(c)];
        }
        const double eff = energy::efficiency_mw_per_tops(report.total_mw, tops);
        totals.add_row({energy::scope_name(scope), csv::format_double(report.total_mw),
                        csv::format_double(tops), csv::format_double(eff)});
        js["total_mw"] = report.total_mw;
        js["mw_per_tops"] = eff;
    }
    detail.save(ctx.path("power_report.csv"));
    totals.save(ctx.path("power_totals.csv"));
    std::ofstream jf(ctx.path("power_report.json"), std::ios::binary);
    jf << j.dump(2) << "\n";
}

void report_throughput(RunContext& ctx) {
    struct Row {
        int ports, k;
        double baud;
    };
    std::vector<Row> rows{{8, 3, 10.0}, {8, 3, 50.0}, {64, 3, 100.0}};
    const Row own{ctx.scenario.opu.awgr.port_count, 3, ctx.scenario.opu.baud_ghz};
    bool seen = false;
    for (const Row& r : rows)
        seen = seen || (r.ports == own.ports && r.k == own.k && r.baud == own.baud);
    if (!seen) rows.push_back(own);

    // A cluster run log in the same output directory contributes the achieved
    // column; without one the table is peak-only.
    double achieved = -1.0;
    int log_ports = 0;
    double log_baud = 0.0;
    const fs::path log = ctx.out_dir / "report.json";
    if (fs::exists(log)) {
        std::ifstream f(log);
        const nlohmann::json run = nlohmann::json::parse(f, nullptr, false);
        if (!run.is_discarded() && run.contains("achieved_tops")) {
            achieved = run["achieved_tops"].get<double>();
            log_ports = run.value("ports", 0);
            log_baud = run.value("baud_ghz", 0.0);
        }
    }

    std::vector<std::string> head{"ports", "kernel_length", "baud_ghz", "peak_tops"};
    if (achieved >= 0.0) head.push_back("achieved_tops");
    csv::Table table(head);
    for (const Row& r : rows) {
        std::vector<std::string> cells{csv::format_int(r.ports), csv::format_int(r.k),
                                       csv::format_double(r.baud),
                                       csv::format_double(opu::peak_tops(r.ports, r.k, r.baud))};
        if (achieved >= 0.0)
            cells.push_back(r.ports == log_ports && r.baud == log_baud
                                ? csv::format_double(achieved)
                                : std::string());
        table.add_row(cells);
    }
    table.save(ctx.path("peak_throughput.csv"));
}

int run_report(RunContext& ctx) {
    const std::string& kind = ctx.scenario.report.kind;
    if (kind == "power") report_power(ctx);
    else if (kind == "throughput") report_throughput(ctx);
    else throw ConfigError("report.kind must be power|throughput, got '" + kind + "'");
    return 0;
}

// --- run-cluster ---------------------------------------------------------------

std::vector<cluster::Job> build_jobs(RunContext& ctx) {
    const auto& cs = ctx.scenario.cluster;
    if (cs.jobs < 1) throw ConfigError("cluster.jobs must be >= 1");
    if (cs.edges < 1) throw ConfigError("cluster.edges must be >= 1");
    const cluster::JobKind kind = cluster::job_kind_from_name(cs.job_kind);
    NoiseStream gen(derive_seed(ctx.scenario.seed, 0xc1e4));

    auto random_kernel = [&](int rows, int cols) {
        Eigen::MatrixXd k(rows, cols);
        do {
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) k(r, c) = 2.0 * gen.uniform() - 1.0;
        } while (k.array().abs().maxCoeff() == 0.0);
        return k;
    };
    auto random_image = [&](int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = gen.uniform();
        return m;
    };

    std::vector<cluster::Job> jobs;
    jobs.reserve(static_cast<std::size_t>(cs.jobs));
    for (int i = 0; i < cs.jobs; ++i) {
        cluster::Job job;
        job.id = static_cast<std::uint64_t>(i);
        job.origin_edge = i % cs.edges;
        job.kind = kind;
        job.submit_time_ns = cs.submit_spread_ns > 0.0 ? gen.uniform() * cs.submit_spread_ns : 0.0;
        switch (kind) {
        case cluster::JobKind::Conv1d:
            job.payload = random_image(1, cs.payload_width);
            job.kernel = random_kernel(1, cs.kernel_length);
            break;
        case cluster::JobKind::Conv2d:
            job.payload = random_image(cs.image_size, cs.image_size);
            job.kernel = random_kernel(cs.kernel_length, cs.kernel_length);
            break;
        case cluster::JobKind::Layer: {
            auto layer = std::make_shared<convnet::Conv2dLayer>();
            layer->in_channels = 1;
            layer->out_channels = 2;
            layer->kernel_size = cs.kernel_length;
            layer->kernels = {random_kernel(cs.kernel_length, cs.kernel_length),
                              random_kernel(cs.kernel_length, cs.kernel_length)};
            layer->bias = Eigen::VectorXd::Zero(2);
            layer->bias[0] = gen.uniform() - 0.5;
            layer->bias[1] = gen.uniform() - 0.5;
            layer->relu = true;
            job.layer = layer;
            job.layer_input = {random_image(cs.image_size, cs.image_size)};
            break;
        }
        }
        jobs.push_back(std::move(job));
    }
    return jobs;
}

int run_cluster_cmd(RunContext& ctx) {
    const auto& cs = ctx.scenario.cluster;
    if (cs.units < 1) throw ConfigError("cluster.units must be >= 1");

    cluster::OpuPool pool;
    pool.units.assign(static_cast<std::size_t>(cs.units), ctx.scenario.opu);
    const std::vector<cluster::Job> jobs = build_jobs(ctx);

    const opu::WavelengthPlan plan = opu::plan_wavelengths(
        ctx.scenario.opu.awgr, cs.kernel_length, ctx.scenario.opu.layout);
    const std::vector<int> channels = cluster::allocate_channels(plan, cs.edges);

    const cluster::RunOutput run =
        cluster::run_cluster(jobs, pool, ctx.scenario.link, ctx.scenario.seed);

    // Per-job rows; unit/start refer to the job's first scheduled task.
    std::vector<const cluster::Placement*> first(jobs.size(), nullptr);
    for (const cluster::Placement& p : run.assignment.placements)
        if (p.task_index == 0) first[static_cast<std::size_t>(p.job_index)] = &p;

    csv::Table jobs_csv({"job_id", "kind", "unit", "start_slot", "ok", "submit_ns", "finish_ns",
                         "latency_ns", "energy_mj", "error"});
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const cluster::JobResult& r = run.jobs[i];
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        jobs_csv.add_row({csv::format_int(static_cast<long long>(r.job_id)),
                          cluster::job_kind_name(jobs[i].kind),
                          csv::format_int(first[i] ? first[i]->unit : -1),
                          csv::format_int(first[i] ? first[i]->start_slot : -1),
                          csv::format_int(r.ok ? 1 : 0), csv::format_double(jobs[i].submit_time_ns),
                          csv::format_double(r.finish_ns), csv::format_double(r.latency_ns),
                          csv::format_double(r.energy_mj), err});
    }
    jobs_csv.save(ctx.path("jobs.csv"));

    csv::Table tasks_csv({"job_id", "task", "unit", "start_slot", "duration_slots", "ops"});
    for (const cluster::Placement& p : run.assignment.placements)
        tasks_csv.add_row({csv::format_int(p.job_index), csv::format_int(p.task_index),
                           csv::format_int(p.unit), csv::format_int(p.start_slot),
                           csv::format_int(p.duration_slots), csv::format_double(p.ops)});
    tasks_csv.save(ctx.path("tasks.csv"));

    nlohmann::json j;
    j["jobs"] = cs.jobs;
    j["units"] = cs.units;
    j["ports"] = ctx.scenario.opu.awgr.port_count;
    j["baud_ghz"] = ctx.scenario.opu.baud_ghz;
    j["kernel_length"] = cs.kernel_length;
    j["makespan_ns"] = run.report.makespan_ns;
    j["total_ops"] = run.report.total_ops;
    j["achieved_tops"] = run.report.achieved_tops;
    j["energy_mj"] = run.report.energy_mj;
    j["utilization"] = std::vector<double>(run.report.utilization.data(),
                                           run.report.utilization.data() +
                                               run.report.utilization.size());
    j["edge_channels"] = channels;
    std::ofstream jf(ctx.path("report.json"), std::ios::binary);
    jf << j.dump(2) << "\n";
    return 0;
}

// --- train-toy / eval ----------------------------------------------------------

int run_train(RunContext& ctx) {
    const convnet::Dataset train = load_split(ctx, true);
    convnet::TrainSettings settings;
    settings.epochs = ctx.scenario.train.epochs;
    settings.batch = ctx.scenario.train.batch;
    settings.learning_rate = ctx.scenario.train.learning_rate;
    settings.seed = ctx.scenario.seed;
    const convnet::ToyCnn model = convnet::train_toy_cnn(train, settings);
    convnet::save_model(model, ctx.path(ctx.scenario.train.model_out));

    const convnet::EvalResult on_train =
        convnet::evaluate_classifier(model, train, convnet::ExecutionMode::floating());
    csv::Table summary({"train_images", "epochs", "batch", "learning_rate", "train_accuracy"});
    summary.add_row({csv::format_int(train.size()), csv::format_int(settings.epochs),
                     csv::format_int(settings.batch), csv::format_double(settings.learning_rate),
                     csv::format_double(on_train.accuracy)});
    summary.save(ctx.path("train_summary.csv"));
    return 0;
}

int run_eval(RunContext& ctx) {
    const auto& ev = ctx.scenario.eval;
    const convnet::ToyCnn model = ensure_model(ctx, ev.model_path);
    const convnet::Dataset test = load_split(ctx, false);

    csv::Table table({"mode", "bits", "seed", "accuracy"});
    if (ev.include_float) {
        const convnet::EvalResult res =
            convnet::evaluate_classifier(model, test, convnet::ExecutionMode::floating());
        table.add_row({"float", csv::format_int(0), csv::format_int(0),
                       csv::format_double(res.accuracy)});
        csv::write_matrix(ctx.path("confusion_float.csv"), res.confusion.cast<double>());
    }
    for (int bits : ev.bits)
        for (std::uint64_t seed : ev.seeds) {
            const convnet::EvalResult res = convnet::evaluate_classifier(
                model, test, convnet::ExecutionMode::quantized(bits, seed));
            table.add_row({"quantized", csv::format_int(bits),
                           csv::format_int(static_cast<long long>(seed)),
                           csv::format_double(res.accuracy)});
        }
    table.save(ctx.path("accuracy.csv"));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"AWGR optical computing simulator"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    int parallel = 0;
    app.add_option("--scenario", scenario_path, "scenario JSON file")->required();
    app.add_option("--out", out_override, "output directory (overrides the scenario)");
    auto* seed_opt = app.add_option("--seed", seed_override, "seed override");
    app.add_option("--parallel", parallel, "sweep worker count (0 = hardware threads)");

    auto* convolve = app.add_subcommand("convolve", "run a convolution experiment");
    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    auto* report = app.add_subcommand("report", "emit a power or throughput report");
    auto* run_cluster = app.add_subcommand("run-cluster", "schedule and execute a job batch");
    auto* train_toy = app.add_subcommand("train-toy", "train the toy classifier");
    auto* eval = app.add_subcommand("eval", "evaluate the toy classifier");
    for (CLI::App* sub : {convolve, sweep, report, run_cluster, train_toy, eval})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        RunContext ctx;
        ctx.scenario = config::load_scenario(scenario_path);
        if (seed_opt->count() > 0) ctx.scenario.seed = seed_override;
        if (!out_override.empty()) ctx.scenario.out_dir = out_override;
        if (ctx.scenario.out_dir.empty()) ctx.scenario.out_dir = "out/" + ctx.scenario.name;
        ctx.out_dir = ctx.scenario.out_dir;
        ctx.parallel = parallel;
        fs::create_directories(ctx.out_dir);

        int rc = 0;
        if (convolve->parsed()) rc = run_convolve(ctx);
        else if (sweep->parsed()) rc = run_sweep(ctx);
        else if (report->parsed()) rc = run_report(ctx);
        else if (run_cluster->parsed()) rc = run_cluster_cmd(ctx);
        else if (train_toy->parsed()) rc = run_train(ctx);
        else if (eval->parsed()) rc = run_eval(ctx);
        if (rc == 0) ctx.finish();
        return rc;
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
