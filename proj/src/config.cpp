#include "ocsim/config.hpp"

#include "ocsim/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace ocsim::config {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open: " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("bad JSON in " + path + ": " + e.what());
    }
}

// Wrapper that tracks which keys were read and rejects everything else, so a
// typo in a scenario fails loudly with its JSON path.
class Strict {
public:
    Strict(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j_->is_object()) throw ConfigError(path_ + " must be a JSON object");
    }

    bool has(const std::string& key) const { return j_->contains(key); }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!j_->contains(key)) return fallback;
        return fetch<T>(key);
    }

    template <typename T>
    T require(const std::string& key) {
        if (!j_->contains(key)) throw ConfigError(path_ + "." + key + " is required");
        return fetch<T>(key);
    }

    Strict child(const std::string& key) {
        if (!j_->contains(key)) throw ConfigError(path_ + "." + key + " is required");
        consumed_.insert(key);
        return Strict(j_->at(key), path_ + "." + key);
    }

    const json& raw(const std::string& key) {
        if (!j_->contains(key)) throw ConfigError(path_ + "." + key + " is required");
        consumed_.insert(key);
        return j_->at(key);
    }

    const json& node() const { return *j_; }
    const std::string& path() const { return path_; }

    void finish() const {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!consumed_.count(it.key()))
                throw ConfigError("unknown key '" + path_ + "." + it.key() + "'");
    }

private:
    template <typename T>
    T fetch(const std::string& key) {
        consumed_.insert(key);
        try {
            return j_->at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "." + key + " has the wrong type");
        }
    }

    const json* j_;
    std::string path_;
    std::set<std::string> consumed_;
};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

template <typename T>
std::vector<T> number_array(const json& node, const std::string& path) {
    if (!node.is_array()) throw ConfigError(path + " must be an array");
    std::vector<T> out;
    out.reserve(node.size());
    for (const auto& v : node) {
        if (!v.is_number()) throw ConfigError(path + " must hold numbers");
        out.push_back(v.get<T>());
    }
    return out;
}

void parse_opu(Strict& top, Scenario& s) {
    Strict o = top.child("opu");
    const int ports = o.get<int>("ports", 8);
    const int used = o.get<int>("used_ports", ports);
    s.opu = opu::default_opu(ports, used);
    s.opu.awgr.channel_spacing_ghz = o.get<double>("channel_spacing_ghz", 84.0);
    s.opu.baud_ghz = o.get<double>("baud_ghz", 10.0);
    s.opu.dac_bits = o.get<int>("dac_bits", 8);
    s.opu.adc_bits = o.get<int>("adc_bits", 12);
    s.opu.comb_tooth_power_mw = o.get<double>("comb_tooth_power_mw", 1.0);

    const std::string layout = o.get<std::string>("layout", "contiguous");
    if (layout == "contiguous") s.opu.layout = opu::WeightLayout::Contiguous;
    else if (layout == "edge") s.opu.layout = opu::WeightLayout::EdgeStraddle;
    else throw ConfigError(o.path() + ".layout must be 'contiguous' or 'edge'");

    const std::string mode = o.get<std::string>("mode", "ideal");
    if (mode == "ideal") s.opu.mode = opu::OpuMode::Ideal;
    else if (mode == "noisy") s.opu.mode = opu::OpuMode::Noisy;
    else throw ConfigError(o.path() + ".mode must be 'ideal' or 'noisy'");

    const std::string passband = o.get<std::string>("passband", "ideal");
    if (passband == "ideal") s.opu.awgr.passband = photonics::PassbandModel::Ideal;
    else if (passband == "gaussian") {
        s.opu.awgr.passband = photonics::PassbandModel::Gaussian;
        s.opu.awgr.gaussian_fwhm_ghz =
            o.get<double>("passband_fwhm_ghz", s.opu.awgr.channel_spacing_ghz / 2.0);
    } else {
        throw ConfigError(o.path() + ".passband must be 'ideal' or 'gaussian'");
    }

    if (o.has("noise")) {
        Strict n = o.child("noise");
        s.opu.noise.sigma_ref = n.get<double>("sigma_ref", s.opu.noise.sigma_ref);
        s.opu.noise.reference_baud_ghz =
            n.get<double>("reference_baud_ghz", s.opu.noise.reference_baud_ghz);
        s.opu.noise.alpha = n.get<double>("alpha", s.opu.noise.alpha);
        s.opu.noise.seed = n.get<std::uint64_t>("seed", s.opu.noise.seed);
        n.finish();
    }
    if (o.has("mzm")) {
        Strict m = o.child("mzm");
        photonics::MzmModel mzm;
        mzm.v_pi_v = m.get<double>("v_pi_v", 3.5);
        mzm.bias_v = m.get<double>("bias_v", mzm.v_pi_v / 2.0);
        mzm.v_pp_v = m.get<double>("v_pp_v", 1.0);
        mzm.bandwidth_ghz = m.get<double>("bandwidth_ghz", 0.0);
        mzm.delay_ps = m.get<double>("delay_ps", 0.0);
        mzm.insertion_loss_db = m.get<double>("insertion_loss_db", 0.0);
        const std::string transfer = m.get<std::string>("transfer", "sinusoidal");
        if (transfer == "linear") mzm.transfer = photonics::MzmTransfer::Linear;
        else if (transfer == "sinusoidal") mzm.transfer = photonics::MzmTransfer::Sinusoidal;
        else throw ConfigError(m.path() + ".transfer must be 'linear' or 'sinusoidal'");
        m.finish();
        s.opu.mzm_array.assign(s.opu.mzm_array.size(), mzm);
    }
    if (o.has("pd")) {
        Strict p = o.child("pd");
        s.opu.pd.responsivity_a_per_w = p.get<double>("responsivity_a_per_w", 0.65);
        s.opu.pd.bias_v = p.get<double>("bias_v", 2.0);
        s.opu.pd.noise_sigma_ma = p.get<double>("noise_sigma_ma", 0.0);
        p.finish();
    }
    o.finish();
    s.opu.validate();
}

void parse_link(Strict& top, Scenario& s) {
    Strict l = top.child("link");
    s.link.launch_power_dbm = l.get<double>("launch_power_dbm", 1.0);
    s.link.fiber_length_km = l.get<double>("fiber_length_km", 80.0);
    s.link.fiber_loss_db_per_km = l.get<double>("fiber_loss_db_per_km", 0.2);
    s.link.extra_attenuation_db = l.get<double>("extra_attenuation_db", 0.0);
    s.link.propagation_delay_us_per_km = l.get<double>("propagation_delay_us_per_km", 5.0);
    s.pam.levels = l.get<int>("pam_levels", 4);
    s.pam.baud_ghz = l.get<double>("pam_baud_ghz", 25.0);
    s.fec.code_rate = l.get<double>("fec_rate", 0.75);
    s.fec.pre_fec_ber_threshold = l.get<double>("pre_fec_ber_threshold", 0.02);
    s.curve.noise_floor_dbm = l.get<double>("noise_floor_dbm", -36.77);
    l.finish();
    s.link.validate();
    s.pam.validate();
    s.fec.validate();
}

} // namespace

Scenario load_scenario(const std::string& path) {
    const json root = parse_file(path);
    Scenario s;
    // nlohmann objects iterate in key order, so dump() is canonical.
    s.hash = fnv1a(root.dump());
    s.source_dir = fs::path(path).parent_path().string();

    Strict top(root, "scenario");
    s.name = top.get<std::string>("name", fs::path(path).stem().string());
    s.seed = top.get<std::uint64_t>("seed", 1);
    s.out_dir = top.get<std::string>("out_dir", "");

    if (top.has("opu")) parse_opu(top, s);
    if (top.has("link")) parse_link(top, s);

    if (top.has("convolve")) {
        Strict c = top.child("convolve");
        s.convolve.task = c.get<std::string>("task", "elementary");
        s.convolve.op = c.get<std::string>("op", "add");
        s.convolve.trials = c.get<int>("trials", 4096);
        s.convolve.levels = c.get<int>("levels", 8);
        s.convolve.kernels_path = c.get<std::string>("kernels_path", s.convolve.kernels_path);
        s.convolve.image_kind = c.get<std::string>("image_kind", "synthetic");
        s.convolve.image_size = c.get<int>("image_size", 32);
        s.convolve.image_index = c.get<int>("image_index", 0);
        s.convolve.model_path = c.get<std::string>("model_path", "");
        s.convolve.input_path = c.get<std::string>("input_path", "");
        s.convolve.kernel_path = c.get<std::string>("kernel_path", "");
        c.finish();
    }
    if (top.has("sweep")) {
        Strict w = top.child("sweep");
        s.sweep.axis = w.get<std::string>("axis", "baud");
        if (w.has("points")) s.sweep.points = number_array<double>(w.raw("points"), w.path() + ".points");
        s.sweep.trials = w.get<int>("trials", 4096);
        if (w.has("seeds"))
            s.sweep.seeds = number_array<std::uint64_t>(w.raw("seeds"), w.path() + ".seeds");
        s.sweep.payload_bytes = w.get<long long>("payload_bytes", 200000);
        w.finish();
    }
    if (top.has("dataset")) {
        Strict d = top.child("dataset");
        s.dataset.train_images = d.get<std::string>("train_images", s.dataset.train_images);
        s.dataset.train_labels = d.get<std::string>("train_labels", s.dataset.train_labels);
        s.dataset.test_images = d.get<std::string>("test_images", s.dataset.test_images);
        s.dataset.test_labels = d.get<std::string>("test_labels", s.dataset.test_labels);
        s.dataset.limit = d.get<int>("limit", -1);
        d.finish();
    }
    if (top.has("train")) {
        Strict t = top.child("train");
        s.train.epochs = t.get<int>("epochs", 10);
        s.train.batch = t.get<int>("batch", 16);
        s.train.learning_rate = t.get<double>("learning_rate", 0.05);
        s.train.model_out = t.get<std::string>("model_out", "toy_model.bin");
        t.finish();
    }
    if (top.has("eval")) {
        Strict e = top.child("eval");
        s.eval.model_path = e.get<std::string>("model_path", "toy_model.bin");
        s.eval.include_float = e.get<bool>("include_float", true);
        if (e.has("bits")) s.eval.bits = number_array<int>(e.raw("bits"), e.path() + ".bits");
        if (e.has("seeds"))
            s.eval.seeds = number_array<std::uint64_t>(e.raw("seeds"), e.path() + ".seeds");
        e.finish();
    }
    if (top.has("cluster")) {
        Strict c = top.child("cluster");
        s.cluster.units = c.get<int>("units", 5);
        s.cluster.jobs = c.get<int>("jobs", 100);
        s.cluster.job_kind = c.get<std::string>("job_kind", "conv1d");
        s.cluster.payload_width = c.get<int>("payload_width", 8);
        s.cluster.kernel_length = c.get<int>("kernel_length", 3);
        s.cluster.image_size = c.get<int>("image_size", 16);
        s.cluster.edges = c.get<int>("edges", 1);
        s.cluster.submit_spread_ns = c.get<double>("submit_spread_ns", 0.0);
        c.finish();
    }
    if (top.has("report")) {
        Strict r = top.child("report");
        s.report.kind = r.get<std::string>("kind", "power");
        s.report.power_table_path = r.get<std::string>("power_table_path", s.report.power_table_path);
        s.report.bom_path = r.get<std::string>("bom_path", s.report.bom_path);
        s.report.peak_baud_ghz = r.get<double>("peak_baud_ghz", 50.0);
        r.finish();
    }
    top.finish();
    return s;
}

std::string resolve_input(const Scenario& scenario, const std::string& path) {
    if (path.empty()) throw ConfigError("empty input path");
    fs::path p(path);
    if (p.is_absolute()) return path;
    std::vector<fs::path> tried;
    std::vector<fs::path> bases;
    if (!scenario.source_dir.empty()) bases.emplace_back(scenario.source_dir);
    if (const char* root = std::getenv(kFixtureRootEnv)) bases.emplace_back(root);
    bases.emplace_back(fs::current_path());
    for (const fs::path& base : bases) {
        fs::path candidate = base / p;
        if (fs::exists(candidate)) return candidate.string();
        tried.push_back(candidate);
    }
    std::string msg = "input not found: " + path + " (tried";
    for (const auto& t : tried) msg += " " + t.string();
    throw ConfigError(msg + ")");
}

energy::ComponentPowerTable load_power_table(const std::string& path) {
    const json root = parse_file(path);
    Strict top(root, "power_table");
    Strict units = top.child("units_mw");
    energy::ComponentPowerTable table;
    for (int c = 0; c < energy::kComponentCount; ++c)
        table[static_cast<energy::Component>(c)] =
            units.require<double>(energy::component_name(static_cast<energy::Component>(c)));
    units.finish();
    if (top.has("derivation")) top.raw("derivation"); // free-form notes
    top.finish();
    table.validate();
    return table;
}

energy::BillOfMaterials load_bom(const std::string& path) {
    const json root = parse_file(path);
    Strict top(root, "bom");
    Strict scopes = top.child("scopes");
    energy::BillOfMaterials bom;
    for (int sc = 0; sc < energy::kScopeCount; ++sc) {
        const auto scope = static_cast<energy::Scope>(sc);
        Strict block = scopes.child(energy::scope_name(scope));
        for (int c = 0; c < energy::kComponentCount; ++c) {
            const auto comp = static_cast<energy::Component>(c);
            bom.count(scope, comp) = block.get<int>(energy::component_name(comp), 0);
        }
        block.finish();
    }
    scopes.finish();
    if (top.has("derivation")) top.raw("derivation");
    top.finish();
    bom.validate();
    return bom;
}

std::vector<NamedKernel> load_kernels(const std::string& path) {
    const json root = parse_file(path);
    Strict top(root, "kernels_file");
    const json& list = top.raw("kernels");
    if (!list.is_array() || list.empty()) throw ConfigError(path + ": kernels must be a non-empty array");
    std::vector<NamedKernel> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        Strict entry(list[i], "kernels[" + std::to_string(i) + "]");
        NamedKernel nk;
        nk.name = entry.require<std::string>("name");
        const json& rows = entry.raw("rows");
        if (!rows.is_array() || rows.empty())
            throw ConfigError(entry.path() + ".rows must be a non-empty array");
        const std::size_t width = rows[0].size();
        nk.kernel.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto row = number_array<double>(rows[r], entry.path() + ".rows");
            if (row.size() != width) throw ConfigError(entry.path() + ".rows is ragged");
            for (std::size_t c = 0; c < width; ++c)
                nk.kernel(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
        }
        entry.finish();
        out.push_back(std::move(nk));
    }
    top.finish();
    return out;
}

std::string calibration_report_json(const opu::CalibrationReport& report) {
    json j;
    j["signal_rms"] = report.signal_rms;
    j["sweeps"] = report.sweeps;
    j["modulators"] = json::array();
    for (std::size_t i = 0; i < report.corrections.size(); ++i) {
        const auto& c = report.corrections[i];
        j["modulators"].push_back({{"index", i},
                                   {"bias_v", c.bias_v},
                                   {"v_pp_gain", c.v_pp_gain},
                                   {"delay_ps", c.delay_ps},
                                   {"residual_rms", report.residual_rms[static_cast<Eigen::Index>(i)]}});
    }
    return j.dump(2) + "\n";
}

void write_manifest(const std::string& out_dir, const Scenario& scenario,
                    const std::vector<std::string>& outputs, long long duration_ms) {
    char hash[24];
    std::snprintf(hash, sizeof(hash), "0x%016llx", static_cast<unsigned long long>(scenario.hash));
    json j;
    j["scenario"] = scenario.name;
    j["scenario_hash"] = hash;
    j["tool_version"] = kToolVersion;
    j["outputs"] = outputs;
    j["duration_ms"] = duration_ms;
    std::ofstream f(fs::path(out_dir) / "manifest.json", std::ios::binary);
    if (!f) throw ConfigError("cannot write manifest in " + out_dir);
    f << j.dump(2) << "\n";
}

} // namespace ocsim::config
