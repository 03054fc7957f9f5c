#include "ocsim/opu.hpp"

#include "ocsim/errors.hpp"
#include "ocsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ocsim::opu {

namespace {

constexpr double kPi = 3.14159265358979323846;

int mod(int value, int n) {
    int r = value % n;
    return r < 0 ? r + n : r;
}

double rms(const Eigen::ArrayXd& v) { return std::sqrt(v.square().mean()); }

// Drive voltage that makes the modulator transmit exactly x.
double drive_for_transmission(const photonics::MzmModel& mzm, double x) {
    if (mzm.transfer == photonics::MzmTransfer::Linear) return x;
    return 2.0 * mzm.v_pi_v / kPi * std::asin(std::sqrt(x)) - mzm.bias_v;
}

OpuConfig trimmed_config(const OpuConfig& config, int length) {
    if (config.input_length() < length)
        throw CapacityError("operation needs " + std::to_string(length) + " driven ports, unit has " +
                                std::to_string(config.input_length()),
                            length - config.input_length());
    OpuConfig out = config;
    out.used_input_ports.assign(config.used_input_ports.begin(),
                                config.used_input_ports.begin() + length);
    out.mzm_array.assign(config.mzm_array.begin(), config.mzm_array.begin() + length);
    return out;
}

} // namespace

void Kernel::validate() const {
    if (weights.size() < 1) throw ShapeError("kernel needs at least one tap");
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (!std::isfinite(weights[i])) throw InvalidParameter("kernel taps must be finite");
}

void NoiseModel::validate() const {
    if (sigma_ref < 0.0) throw InvalidParameter("noise sigma must be >= 0");
    if (!(reference_baud_ghz > 0.0)) throw InvalidParameter("reference baud must be positive");
    if (alpha < 0.0) throw InvalidParameter("noise exponent must be >= 0");
}

double noise_sigma(const NoiseModel& model, double baud_ghz) {
    model.validate();
    if (!(baud_ghz > 0.0)) throw InvalidParameter("baud must be positive");
    return model.sigma_ref * std::pow(baud_ghz / model.reference_baud_ghz, model.alpha);
}

int WavelengthPlan::tooth_count() const { return center_alignment + port_count; }

int WavelengthPlan::residue_of(int tooth) const { return mod(tooth - center_alignment, port_count); }

int WavelengthPlan::weight_offset_of(int residue) const {
    const int d = mod(residue - support_shift, port_count);
    return d < kernel_length ? d : -1;
}

int WavelengthPlan::tooth_of(int cycle, int residue) const {
    return center_alignment + cycle * port_count + residue;
}

std::vector<int> WavelengthPlan::cycle_teeth(int cycle) const {
    std::vector<int> teeth;
    teeth.reserve(static_cast<std::size_t>(port_count));
    for (int r = 0; r < port_count; ++r) teeth.push_back(tooth_of(cycle, r));
    return teeth;
}

std::vector<int> WavelengthPlan::weight_teeth() const {
    std::vector<int> teeth;
    for (int cycle : {negative_cycle, positive_cycle})
        for (int r = 0; r < port_count; ++r)
            if (weight_offset_of(r) >= 0) teeth.push_back(tooth_of(cycle, r));
    std::sort(teeth.begin(), teeth.end());
    return teeth;
}

std::vector<int> WavelengthPlan::signal_teeth() const {
    std::vector<int> teeth;
    for (int cycle : {negative_cycle, positive_cycle})
        for (int r = 0; r < port_count; ++r)
            if (weight_offset_of(r) < 0) teeth.push_back(tooth_of(cycle, r));
    std::sort(teeth.begin(), teeth.end());
    return teeth;
}

void WavelengthPlan::validate() const {
    if (port_count < 1) throw InvalidParameter("plan needs at least one port");
    if (kernel_length < 1 || kernel_length > port_count)
        throw InvalidParameter("kernel length must be in 1..port_count");
    if (support_shift < 0 || support_shift >= port_count)
        throw InvalidParameter("support shift must be a residue");
    if (positive_cycle == negative_cycle)
        throw InvalidParameter("weight cycles must be distinct");
    for (int cycle : {negative_cycle, positive_cycle})
        if (center_alignment + cycle * port_count < 0)
            throw InvalidParameter("weight cycle extends below tooth 0");
}

SplitKernel split_kernel(const Kernel& kernel) {
    kernel.validate();
    SplitKernel split;
    split.positive = kernel.weights.max(0.0);
    split.negative = (-kernel.weights).max(0.0);
    return split;
}

std::pair<Kernel, double> normalize_kernel(const Kernel& kernel) {
    kernel.validate();
    const double scale = kernel.weights.abs().maxCoeff();
    if (!(scale > 0.0)) throw InvalidParameter("cannot normalize an all-zero kernel");
    return {Kernel{kernel.weights / scale}, scale};
}

WavelengthPlan plan_wavelengths(const photonics::AwgrSpec& awgr, int kernel_length,
                                WeightLayout layout) {
    awgr.validate();
    const int n = awgr.port_count;
    if (kernel_length < 1) throw InvalidParameter("kernel length must be >= 1");
    if (kernel_length > n)
        throw CapacityError("kernel of " + std::to_string(kernel_length) +
                                " taps does not fit a " + std::to_string(n) + "-port cycle",
                            kernel_length - n);
    WavelengthPlan plan;
    plan.port_count = n;
    plan.center_alignment = awgr.center_alignment;
    plan.kernel_length = kernel_length;
    plan.support_shift = layout == WeightLayout::Contiguous ? 0 : mod(n - kernel_length / 2, n);
    plan.validate();
    return plan;
}

photonics::WaveshaperProfile load_weights(const WavelengthPlan& plan, const SplitKernel& split,
                                          const photonics::CombSpectrum& comb) {
    plan.validate();
    comb.validate();
    const int k = plan.kernel_length;
    if (split.positive.size() != k || split.negative.size() != k)
        throw ShapeError("split kernel does not match the planned kernel length");
    if (comb.grid.tooth_count < plan.tooth_count())
        throw ShapeError("comb has " + std::to_string(comb.grid.tooth_count) +
                         " teeth, plan needs " + std::to_string(plan.tooth_count()));
    const double tol = 1.0 + 1e-12;
    if (split.positive.maxCoeff() > tol || split.negative.maxCoeff() > tol)
        throw InvalidParameter("weights exceed unit magnitude, normalize the kernel first");
    if (split.positive.minCoeff() < 0.0 || split.negative.minCoeff() < 0.0)
        throw InvalidParameter("split kernel halves must be nonnegative");

    photonics::WaveshaperProfile profile;
    profile.attenuation_db = Eigen::ArrayXd::Zero(comb.grid.tooth_count);
    auto att_for = [](double magnitude) {
        return magnitude > 0.0 ? -10.0 * std::log10(magnitude) : photonics::WaveshaperProfile::kBlocked;
    };
    for (int d = 0; d < k; ++d) {
        const int r = mod(plan.support_shift + d, plan.port_count);
        profile.attenuation_db[plan.tooth_of(plan.positive_cycle, r)] = att_for(split.positive[d]);
        profile.attenuation_db[plan.tooth_of(plan.negative_cycle, r)] = att_for(split.negative[d]);
    }
    return profile;
}

void OpuConfig::validate() const {
    awgr.validate();
    const int n = awgr.port_count;
    if (awgr.center_alignment != n)
        throw ConfigError("processing units expect center_alignment == port_count");
    if (used_input_ports.empty()) throw ConfigError("no input ports in use");
    if (static_cast<int>(used_input_ports.size()) > n)
        throw ConfigError("more used ports than the router has");
    for (std::size_t i = 0; i < used_input_ports.size(); ++i) {
        const int p = used_input_ports[i];
        if (p < 0 || p >= n) throw ConfigError("used port outside the router");
        if (i > 0 && p != used_input_ports[i - 1] + 1)
            throw ConfigError("used ports must be contiguous ascending");
    }
    if (mzm_array.size() != used_input_ports.size())
        throw ConfigError("one modulator per used port required");
    for (const auto& m : mzm_array) {
        m.validate();
        if (m.insertion_loss_db != mzm_array.front().insertion_loss_db)
            throw ConfigError("modulator insertion losses must match (calibrated state)");
    }
    pd.validate();
    if (dac_bits < 1 || dac_bits > 30) throw ConfigError("dac bits must be in 1..30");
    if (adc_bits < 1 || adc_bits > 30) throw ConfigError("adc bits must be in 1..30");
    if (!(baud_ghz > 0.0)) throw ConfigError("baud must be positive");
    if (!(comb_tooth_power_mw > 0.0)) throw ConfigError("comb tooth power must be positive");
    noise.validate();
}

OpuConfig default_opu(int port_count, int used_ports) {
    OpuConfig config;
    config.awgr.port_count = port_count;
    config.awgr.center_alignment = port_count;
    config.used_input_ports.resize(static_cast<std::size_t>(used_ports));
    for (int i = 0; i < used_ports; ++i) config.used_input_ports[static_cast<std::size_t>(i)] = i;
    config.mzm_array.assign(static_cast<std::size_t>(used_ports), photonics::MzmModel{});
    return config;
}

Eigen::ArrayXd OpuResult::valid() const {
    const auto n = port_outputs.size();
    Eigen::ArrayXd out(valid_count);
    for (int j = 0; j < valid_count; ++j)
        out[j] = port_outputs[(valid_offset + j) % n];
    return out;
}

double quantize_unit_interval(double x, int bits) {
    if (bits < 1 || bits > 30) throw InvalidParameter("quantizer bits must be in 1..30");
    const double step = std::ldexp(1.0, -bits);
    auto idx = static_cast<long>(std::floor(x / step));
    idx = std::clamp(idx, 0L, (1L << bits) - 1);
    return (static_cast<double>(idx) + 0.5) * step;
}

double quantize_symmetric(double x, double full_scale, int bits) {
    if (bits < 1 || bits > 30) throw InvalidParameter("quantizer bits must be in 1..30");
    if (!(full_scale > 0.0)) throw InvalidParameter("quantizer full scale must be positive");
    const double step = 2.0 * full_scale / std::ldexp(1.0, bits);
    auto idx = static_cast<long>(std::floor((x + full_scale) / step));
    idx = std::clamp(idx, 0L, (1L << bits) - 1);
    return -full_scale + (static_cast<double>(idx) + 0.5) * step;
}

OpuResult opu_convolve(const OpuConfig& config, const Kernel& kernel, const Eigen::ArrayXd& x,
                       std::uint64_t seed) {
    config.validate();
    kernel.validate();
    const int n = config.awgr.port_count;
    const int len = config.input_length();
    const int k = kernel.length();
    if (k > len)
        throw CapacityError("kernel of " + std::to_string(k) + " taps needs " + std::to_string(k) +
                                " driven ports, unit drives " + std::to_string(len),
                            k - len);
    if (x.size() != len)
        throw ShapeError("input has " + std::to_string(x.size()) + " samples for " +
                         std::to_string(len) + " driven ports");
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!(x[i] >= 0.0 && x[i] <= 1.0))
            throw InvalidParameter("input samples must lie in [0, 1]");

    // An all-zero kernel blocks every weight tooth: the receivers stay dark
    // and every port reads exactly zero.
    if (kernel.weights.abs().maxCoeff() == 0.0) {
        OpuResult dark;
        dark.port_outputs = Eigen::ArrayXd::Zero(n);
        const WavelengthPlan dark_plan = plan_wavelengths(config.awgr, k, config.layout);
        dark.valid_offset = mod(config.used_input_ports.front() - dark_plan.support_shift, n);
        dark.valid_count = len - k + 1;
        return dark;
    }

    const bool noisy = config.mode == OpuMode::Noisy;
    auto [normalized, scale] = normalize_kernel(kernel);
    const SplitKernel split = split_kernel(normalized);
    const WavelengthPlan plan = plan_wavelengths(config.awgr, k, config.layout);

    photonics::CombSpectrum comb;
    comb.grid = photonics::FrequencyGrid{193.4, config.awgr.channel_spacing_ghz, 2 * n};
    comb.power_mw = Eigen::ArrayXd::Constant(2 * n, config.comb_tooth_power_mw);

    const photonics::WaveshaperProfile page = load_weights(plan, split, comb);
    const photonics::CombSpectrum shaped = apply_waveshaper(comb, page);
    // Data channels leave for the transceiver before the compute path.
    auto [weight_page, data_channels] = photonics::microring_split(shaped, plan.weight_teeth());
    (void)data_channels;

    const double il_linear = std::pow(10.0, -config.mzm_array.front().insertion_loss_db / 10.0);
    const std::uint64_t stream_seed = derive_seed(config.noise.seed, seed);

    std::vector<photonics::CombSpectrum> inputs(static_cast<std::size_t>(n));
    for (auto& in : inputs) {
        in.grid = comb.grid;
        in.power_mw = Eigen::ArrayXd::Zero(comb.grid.tooth_count);
    }
    for (int i = 0; i < len; ++i) {
        double xi = x[i];
        if (noisy) xi = quantize_unit_interval(xi, config.dac_bits);
        const auto& mzm = config.mzm_array[static_cast<std::size_t>(i)];
        const double t = photonics::mzm_transmission(mzm, drive_for_transmission(mzm, xi));
        const int port = config.used_input_ports[static_cast<std::size_t>(i)];
        inputs[static_cast<std::size_t>(port)].power_mw =
            weight_page.power_mw * (t * il_linear / static_cast<double>(len));
    }

    const std::vector<photonics::CombSpectrum> routed = photonics::route_spectra(config.awgr, inputs);

    const std::vector<int> pos_teeth = plan.cycle_teeth(plan.positive_cycle);
    const std::vector<int> neg_teeth = plan.cycle_teeth(plan.negative_cycle);
    const double cal = config.pd.responsivity_a_per_w * config.comb_tooth_power_mw * il_linear /
                       static_cast<double>(len);
    const double full_scale = kernel.weights.abs().sum();
    const double sigma = noisy ? noise_sigma(config.noise, config.baud_ghz) * full_scale : 0.0;
    NoiseStream stream(stream_seed);

    OpuResult result;
    result.port_outputs.resize(n);
    for (int q = 0; q < n; ++q) {
        const auto& spectrum = routed[static_cast<std::size_t>(q)];
        auto [pos_band, rest] = photonics::microring_split(spectrum, pos_teeth);
        auto [neg_band, unused] = photonics::microring_split(rest, neg_teeth);
        (void)unused;
        const double current_ma =
            photonics::balanced_detect(config.pd, pos_band.total_power_mw(),
                                       neg_band.total_power_mw(), derive_seed(stream_seed, 4096 + q));
        double y = current_ma / cal * scale;
        if (noisy) {
            // Converter quantizes the detected signal; the calibrated term models
            // the aggregate analog error budget, measured gaussian at the output,
            // so it lands after the code decision (a clipped tail would distort
            // the fitted error distribution).
            y = quantize_symmetric(y, full_scale, config.adc_bits);
            y += stream.gaussian(sigma);
        }
        result.port_outputs[q] = y;
    }
    result.valid_offset = mod(config.used_input_ports.front() - plan.support_shift, n);
    result.valid_count = len - k + 1;
    return result;
}

Eigen::ArrayXd opu_correlate_row(const OpuConfig& config, const Eigen::ArrayXd& row,
                                 const Kernel& kernel, std::uint64_t seed) {
    config.validate();
    kernel.validate();
    const int k = kernel.length();
    const auto width = static_cast<int>(row.size());
    if (width < k) throw ShapeError("row shorter than the kernel");
    const int total = width - k + 1;

    const int len = std::min(config.input_length(), width);
    const OpuConfig unit = len == config.input_length() ? config : trimmed_config(config, len);

    Eigen::ArrayXd out(total);
    int produced = 0;
    std::uint64_t chunk = 0;
    while (produced < total) {
        const int offset = std::min(produced, width - len);
        const OpuResult res =
            opu_convolve(unit, kernel, row.segment(offset, len), derive_seed(seed, chunk++));
        const Eigen::ArrayXd v = res.valid();
        const int last = std::min(offset + len - k, total - 1);
        for (int j = produced; j <= last; ++j) out[j] = v[j - offset];
        produced = last + 1;
    }
    return out;
}

double elementary_op(const OpuConfig& config, ElementaryOp op, const Eigen::ArrayXd& a,
                     const Eigen::ArrayXd& b, std::uint64_t seed) {
    Eigen::ArrayXd x;
    Kernel kernel;
    switch (op) {
    case ElementaryOp::Multiply:
        if (a.size() != 1 || b.size() != 1) throw ShapeError("multiply takes two scalars");
        x = a;
        kernel.weights = b;
        break;
    case ElementaryOp::Add:
    case ElementaryOp::Subtract:
        if (a.size() != 1 || b.size() != 1) throw ShapeError("add/subtract take two scalars");
        x.resize(2);
        x << a[0], b[0];
        kernel.weights.resize(2);
        kernel.weights << 1.0, (op == ElementaryOp::Add ? 1.0 : -1.0);
        break;
    case ElementaryOp::Mac:
        if (a.size() != b.size() || a.size() < 1)
            throw ShapeError("mac takes two equal-length vectors");
        x = a;
        kernel.weights = b;
        break;
    }
    // An all-zero weight page means every weight tooth is blocked: the
    // receiver stays dark and the result is exactly zero.
    if (kernel.weights.abs().maxCoeff() == 0.0) return 0.0;
    const OpuConfig unit = trimmed_config(config, static_cast<int>(x.size()));
    return opu_convolve(unit, kernel, x, seed).valid()[0];
}

ElementaryBenchmark benchmark_elementary(const OpuConfig& config, ElementaryOp op, int trials,
                                         int levels, int mac_length, std::uint64_t seed) {
    if (trials < 1) throw InvalidParameter("trials must be >= 1");
    if (levels < 2) throw InvalidParameter("levels must be >= 2");
    if (mac_length < 1) throw InvalidParameter("mac length must be >= 1");

    const double top = static_cast<double>(levels - 1);
    NoiseStream operands(derive_seed(seed, 0x0bef));
    ElementaryBenchmark bench;
    bench.ideal.resize(trials);
    bench.computed.resize(trials);
    bench.error.resize(trials);
    bench.normalized.resize(trials);

    Eigen::ArrayXd a, b;
    for (int t = 0; t < trials; ++t) {
        double ideal = 0.0;
        double raw_scale = 1.0; // unit output (math units) -> integer units
        double fs_raw = 1.0;    // output full scale, integer units
        switch (op) {
        case ElementaryOp::Multiply: {
            const double ia = static_cast<double>(operands.index(levels));
            const double ib = static_cast<double>(1 + operands.index(levels - 1));
            a.resize(1);
            b.resize(1);
            a[0] = ia / top;
            b[0] = ib / top;
            ideal = ia * ib;
            raw_scale = top * top;
            fs_raw = top * ib;
            break;
        }
        case ElementaryOp::Add:
        case ElementaryOp::Subtract: {
            const double ia = static_cast<double>(operands.index(levels));
            const double ib = static_cast<double>(operands.index(levels));
            a.resize(1);
            b.resize(1);
            a[0] = ia / top;
            b[0] = ib / top;
            ideal = op == ElementaryOp::Add ? ia + ib : ia - ib;
            raw_scale = top;
            fs_raw = 2.0 * top;
            break;
        }
        case ElementaryOp::Mac: {
            a.resize(mac_length);
            b.resize(mac_length);
            double weight_sum = 0.0;
            do {
                weight_sum = 0.0;
                for (int i = 0; i < mac_length; ++i) {
                    b[i] = static_cast<double>(operands.index(levels));
                    weight_sum += b[i];
                }
            } while (weight_sum == 0.0);
            ideal = 0.0;
            for (int i = 0; i < mac_length; ++i) {
                const double ia = static_cast<double>(operands.index(levels));
                a[i] = ia / top;
                ideal += ia * b[i];
            }
            b /= top;
            raw_scale = top * top;
            fs_raw = top * weight_sum;
            break;
        }
        }
        const double got =
            elementary_op(config, op, a, b, derive_seed(seed, static_cast<std::uint64_t>(t))) *
            raw_scale;
        bench.ideal[t] = ideal;
        bench.computed[t] = got;
        bench.error[t] = got - ideal;
        bench.normalized[t] = (got - ideal) / fs_raw;
    }

    const double mean = bench.error.mean();
    bench.error_std =
        std::sqrt((bench.error - mean).square().sum() / static_cast<double>(std::max(1, trials - 1)));
    bench.enob = measure_enob(bench.normalized, 1.0);
    return bench;
}

double measure_enob(const Eigen::ArrayXd& errors, double full_scale) {
    if (errors.size() < 1) throw InvalidParameter("no error samples");
    if (!(full_scale > 0.0)) throw InvalidParameter("full scale must be positive");
    const double r = rms(errors);
    if (r == 0.0) return std::numeric_limits<double>::infinity();
    return std::log2(full_scale / r);
}

double peak_tops(int port_count, int kernel_length, double baud_ghz) {
    if (port_count < 1) throw InvalidParameter("port count must be >= 1");
    if (kernel_length < 1 || kernel_length > port_count)
        throw InvalidParameter("kernel length must be in 1..port_count");
    if (!(baud_ghz > 0.0)) throw InvalidParameter("baud must be positive");
    const double ops_per_symbol =
        static_cast<double>(port_count - kernel_length + 1) * 2.0 * kernel_length * 2.0;
    return ops_per_symbol * baud_ghz / 1000.0;
}

// --- calibration -------------------------------------------------------------

namespace {

// Seeded multitone drive, peak-normalized, highest tone at fs/4.
Eigen::ArrayXd calibration_signal(const CalibrationSettings& settings) {
    NoiseStream rng(settings.seed);
    Eigen::ArrayXd s = Eigen::ArrayXd::Zero(settings.samples);
    for (int h = 1; h <= settings.tones; ++h) {
        const double amp = 0.5 + 0.5 * rng.uniform();
        const double phase = 2.0 * kPi * rng.uniform();
        const double w = 2.0 * kPi * (0.25 * h / settings.tones);
        for (int i = 0; i < settings.samples; ++i)
            s[i] += amp * std::sin(w * i + phase);
    }
    return s / s.abs().maxCoeff();
}

double golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                       int iterations, double* best_x) {
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iterations; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    *best_x = f1 < f2 ? x1 : x2;
    return std::min(f1, f2);
}

} // namespace

CalibrationReport calibrate_mzm_array(const photonics::MzmModel& nominal,
                                      const std::vector<MzmMismatch>& mismatches,
                                      const CalibrationSettings& settings) {
    nominal.validate();
    if (mismatches.empty()) throw InvalidParameter("calibration needs at least the reference");
    if (mismatches.front().bias_offset_v != 0.0 || mismatches.front().v_pp_ratio != 1.0 ||
        mismatches.front().delay_ps != 0.0)
        throw InvalidParameter("modulator 0 is the alignment reference and cannot be mismatched");
    for (const auto& m : mismatches)
        if (!(m.v_pp_ratio > 0.0)) throw InvalidParameter("drive gain ratio must be positive");
    if (settings.samples < 16 || settings.tones < 1 || !(settings.sample_rate_ghz > 0.0) ||
        !(settings.tolerance > 0.0) || settings.max_sweeps < 1)
        throw InvalidParameter("bad calibration settings");

    const Eigen::ArrayXd s = calibration_signal(settings);
    const double amp = nominal.v_pp_v / 2.0;
    const Eigen::ArrayXd p_ref =
        photonics::mzm_modulate(nominal, 1.0, amp * s, settings.sample_rate_ghz);
    const double signal_rms = rms(p_ref - p_ref.mean());
    const double goal = settings.tolerance * signal_rms;

    const double bias_window =
        settings.bias_window_v > 0.0 ? settings.bias_window_v : 0.35 * nominal.v_pi_v;
    const double delay_window = settings.delay_window_ps > 0.0
                                    ? settings.delay_window_ps
                                    : 0.6 * 1e3 / settings.sample_rate_ghz;

    CalibrationReport report;
    report.corrections.assign(mismatches.size(), MzmCorrection{});
    report.residual_rms = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(mismatches.size()));
    report.signal_rms = signal_rms;

    for (std::size_t j = 1; j < mismatches.size(); ++j) {
        const MzmMismatch& inj = mismatches[j];
        auto objective = [&](const MzmCorrection& c) {
            photonics::MzmModel device = nominal;
            device.bias_v = nominal.bias_v + inj.bias_offset_v + c.bias_v;
            device.delay_ps = nominal.delay_ps + inj.delay_ps + c.delay_ps;
            const Eigen::ArrayXd drive = -(inj.v_pp_ratio * c.v_pp_gain * amp) * s;
            const Eigen::ArrayXd sum =
                p_ref + photonics::mzm_modulate(device, 1.0, drive, settings.sample_rate_ghz);
            return rms(sum - sum.mean());
        };

        MzmCorrection c;
        double residual = objective(c);
        int sweeps = 0;
        while (residual > goal && sweeps < settings.max_sweeps) {
            ++sweeps;
            auto line_search = [&](auto set, double lo, double hi) {
                double best = 0.0;
                golden_minimize(
                    [&](double v) {
                        MzmCorrection probe = c;
                        set(probe, v);
                        return objective(probe);
                    },
                    lo, hi, 48, &best);
                set(c, best);
            };
            line_search([](MzmCorrection& m, double v) { m.bias_v = v; },
                        c.bias_v - bias_window, c.bias_v + bias_window);
            line_search([](MzmCorrection& m, double v) { m.v_pp_gain = v; },
                        settings.gain_low, settings.gain_high);
            line_search([](MzmCorrection& m, double v) { m.delay_ps = v; },
                        c.delay_ps - delay_window, c.delay_ps + delay_window);
            residual = objective(c);
        }
        if (residual > goal)
            throw CalibrationError("modulator " + std::to_string(j) +
                                       " failed to align within tolerance",
                                   residual / signal_rms);
        report.corrections[j] = c;
        report.residual_rms[static_cast<Eigen::Index>(j)] = residual / signal_rms;
        report.sweeps = std::max(report.sweeps, sweeps);
    }
    return report;
}

Eigen::ArrayXd predistort(const Eigen::ArrayXd& drive, double cutoff_ghz, double sample_rate_ghz,
                          double max_boost) {
    if (!(cutoff_ghz > 0.0)) throw InvalidParameter("predistortion needs a positive cutoff");
    if (!(sample_rate_ghz > 0.0)) throw InvalidParameter("sample rate must be positive");
    if (!(max_boost >= 1.0)) throw InvalidParameter("max boost must be >= 1");
    const double a = 1.0 - std::exp(-2.0 * kPi * cutoff_ghz / sample_rate_ghz);
    const double a_eff = std::max(a, 1.0 / max_boost);
    Eigen::ArrayXd out(drive.size());
    double prev = drive.size() ? drive[0] : 0.0;
    for (Eigen::Index i = 0; i < drive.size(); ++i) {
        out[i] = (drive[i] - (1.0 - a_eff) * prev) / a_eff;
        prev = drive[i];
    }
    return out;
}

} // namespace ocsim::opu
