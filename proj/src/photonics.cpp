#include "ocsim/photonics.hpp"

#include "ocsim/csv.hpp"
#include "ocsim/errors.hpp"
#include "ocsim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace ocsim::photonics {

namespace {

constexpr double kPi = 3.14159265358979323846;

double db_to_linear(double db) { return std::pow(10.0, -db / 10.0); }

int mod(int value, int n) {
    int r = value % n;
    return r < 0 ? r + n : r;
}

} // namespace

void FrequencyGrid::validate() const {
    if (tooth_count < 1) throw InvalidParameter("grid needs at least one tooth");
    if (!(spacing_ghz > 0.0)) throw InvalidParameter("grid spacing must be positive");
    if (!(center_thz > 0.0)) throw InvalidParameter("grid center must be positive");
}

bool same_grid(const FrequencyGrid& a, const FrequencyGrid& b) {
    return a.tooth_count == b.tooth_count && a.spacing_ghz == b.spacing_ghz &&
           a.center_thz == b.center_thz;
}

void CombSpectrum::validate() const {
    grid.validate();
    if (power_mw.size() != grid.tooth_count)
        throw ShapeError("spectrum has " + std::to_string(power_mw.size()) + " powers for " +
                         std::to_string(grid.tooth_count) + " teeth");
    for (Eigen::Index i = 0; i < power_mw.size(); ++i)
        if (!(power_mw[i] >= 0.0)) throw InvalidParameter("tooth power must be >= 0");
}

void WaveshaperProfile::validate() const {
    for (Eigen::Index i = 0; i < attenuation_db.size(); ++i) {
        const double a = attenuation_db[i];
        if (std::isnan(a) || a < 0.0)
            throw InvalidParameter("waveshaper attenuation must be >= 0 dB (got tooth " +
                                   std::to_string(i) + ")");
    }
}

void AwgrSpec::validate() const {
    if (port_count < 1) throw InvalidParameter("router needs at least one port");
    if (!(channel_spacing_ghz > 0.0)) throw InvalidParameter("channel spacing must be positive");
    if (center_alignment < 0) throw InvalidParameter("center alignment must be >= 0");
    if (passband == PassbandModel::Gaussian && !(gaussian_fwhm_ghz > 0.0))
        throw InvalidParameter("gaussian passband needs a positive FWHM");
}

void MzmModel::validate() const {
    if (!(v_pi_v > 0.0)) throw InvalidParameter("v_pi must be positive");
    if (!(v_pp_v > 0.0)) throw InvalidParameter("v_pp must be positive");
    if (insertion_loss_db < 0.0) throw InvalidParameter("insertion loss must be >= 0 dB");
}

void PhotodetectorModel::validate() const {
    if (!(responsivity_a_per_w > 0.0)) throw InvalidParameter("responsivity must be positive");
    if (noise_sigma_ma < 0.0) throw InvalidParameter("detector noise sigma must be >= 0");
}

CombSpectrum generate_comb(int line_count, double spacing_ghz, double center_thz,
                           double flatness_db_per_line) {
    if (flatness_db_per_line < 0.0)
        throw InvalidParameter("comb flatness roll-off must be >= 0 dB per line");
    CombSpectrum comb;
    comb.grid = FrequencyGrid{center_thz, spacing_ghz, line_count};
    comb.grid.validate();
    comb.power_mw.resize(line_count);
    const int c = comb.grid.center_index();
    for (int i = 0; i < line_count; ++i)
        comb.power_mw[i] = db_to_linear(flatness_db_per_line * std::abs(i - c));
    return comb;
}

CombSpectrum decimate_comb(const CombSpectrum& comb, int keep_every) {
    comb.validate();
    if (keep_every < 1) throw InvalidParameter("keep_every must be >= 1");
    if (keep_every == 1) return comb;
    const int c = comb.grid.center_index();
    if (c % keep_every != 0)
        throw InvalidParameter("decimation by " + std::to_string(keep_every) +
                               " does not keep the grid center (center index " +
                               std::to_string(c) + ")");
    const int kept = (comb.grid.tooth_count + keep_every - 1) / keep_every;
    CombSpectrum out;
    out.grid = FrequencyGrid{comb.grid.center_thz, comb.grid.spacing_ghz * keep_every, kept};
    if (out.grid.center_index() * keep_every != c)
        throw InvalidParameter("decimated tooth count misplaces the grid center");
    out.power_mw.resize(kept);
    for (int i = 0; i < kept; ++i) out.power_mw[i] = comb.power_mw[i * keep_every];
    return out;
}

CombSpectrum apply_waveshaper(const CombSpectrum& comb, const WaveshaperProfile& profile) {
    comb.validate();
    profile.validate();
    if (profile.attenuation_db.size() != comb.power_mw.size())
        throw ShapeError("waveshaper profile covers " +
                         std::to_string(profile.attenuation_db.size()) + " teeth, comb has " +
                         std::to_string(comb.power_mw.size()));
    CombSpectrum out = comb;
    for (Eigen::Index i = 0; i < out.power_mw.size(); ++i) {
        const double a = profile.attenuation_db[i];
        out.power_mw[i] = std::isinf(a) ? 0.0 : out.power_mw[i] * db_to_linear(a);
    }
    return out;
}

WaveshaperProfile equalize_comb(const CombSpectrum& comb) {
    comb.validate();
    double floor_mw = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < comb.power_mw.size(); ++i)
        if (comb.power_mw[i] > 0.0) floor_mw = std::min(floor_mw, comb.power_mw[i]);
    if (!std::isfinite(floor_mw)) throw InvalidParameter("cannot equalize an all-dark comb");
    WaveshaperProfile profile;
    profile.attenuation_db.resize(comb.power_mw.size());
    for (Eigen::Index i = 0; i < comb.power_mw.size(); ++i) {
        if (comb.power_mw[i] > 0.0 && std::isfinite(floor_mw))
            profile.attenuation_db[i] = 10.0 * std::log10(comb.power_mw[i] / floor_mw);
        else
            profile.attenuation_db[i] = WaveshaperProfile::kBlocked;
    }
    return profile;
}

int awgr_output_port(const AwgrSpec& spec, int input_port, int tooth_index) {
    spec.validate();
    if (input_port < 0 || input_port >= spec.port_count)
        throw InvalidParameter("input port " + std::to_string(input_port) + " outside 0.." +
                               std::to_string(spec.port_count - 1));
    const int m = mod(tooth_index - spec.center_alignment, spec.port_count);
    return mod(input_port - m, spec.port_count);
}

std::vector<CombSpectrum> route_spectra(const AwgrSpec& spec,
                                        const std::vector<CombSpectrum>& inputs) {
    spec.validate();
    if (static_cast<int>(inputs.size()) != spec.port_count)
        throw ShapeError("router has " + std::to_string(spec.port_count) + " ports, got " +
                         std::to_string(inputs.size()) + " input spectra");
    for (const auto& in : inputs) {
        in.validate();
        if (!same_grid(in.grid, inputs.front().grid))
            throw ShapeError("input spectra sit on different grids");
    }
    const FrequencyGrid& grid = inputs.front().grid;
    if (grid.spacing_ghz != spec.channel_spacing_ghz)
        throw InvalidParameter("grid spacing does not match the router channel spacing");

    const int n = spec.port_count;
    std::vector<CombSpectrum> outputs(static_cast<std::size_t>(n));
    for (auto& out : outputs) {
        out.grid = grid;
        out.power_mw = Eigen::ArrayXd::Zero(grid.tooth_count);
    }

    for (int p = 0; p < n; ++p) {
        const auto& power = inputs[static_cast<std::size_t>(p)].power_mw;
        for (int t = 0; t < grid.tooth_count; ++t) {
            if (power[t] <= 0.0) continue;
            const int m = mod(t - spec.center_alignment, n);
            if (spec.passband == PassbandModel::Ideal) {
                outputs[static_cast<std::size_t>(mod(p - m, n))].power_mw[t] += power[t];
                continue;
            }
            // Gaussian passband: the tooth leaks into every port whose channel
            // center is within the filter skirt.
            for (int q = 0; q < n; ++q) {
                const int m_q = mod(p - q, n);
                int d = mod(m - m_q, n);
                if (d > n / 2) d -= n; // minimal cyclic offset in channels
                const double df = d * spec.channel_spacing_ghz;
                const double t_lin =
                    std::exp(-4.0 * std::log(2.0) * df * df /
                             (spec.gaussian_fwhm_ghz * spec.gaussian_fwhm_ghz));
                outputs[static_cast<std::size_t>(q)].power_mw[t] += power[t] * t_lin;
            }
        }
    }
    return outputs;
}

Eigen::ArrayXd delay_samples(const Eigen::ArrayXd& samples, double delay_in_samples) {
    const Eigen::Index n = samples.size();
    Eigen::ArrayXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pos = static_cast<double>(i) - delay_in_samples;
        if (pos <= 0.0) {
            out[i] = samples[0];
        } else if (pos >= static_cast<double>(n - 1)) {
            out[i] = samples[n - 1];
        } else {
            const auto lo = static_cast<Eigen::Index>(std::floor(pos));
            const double frac = pos - static_cast<double>(lo);
            out[i] = samples[lo] * (1.0 - frac) + samples[lo + 1] * frac;
        }
    }
    return out;
}

Eigen::ArrayXd lowpass_single_pole(const Eigen::ArrayXd& samples, double cutoff_ghz,
                                   double sample_rate_ghz) {
    if (!(sample_rate_ghz > 0.0)) throw InvalidParameter("sample rate must be positive");
    if (cutoff_ghz <= 0.0 || samples.size() == 0) return samples;
    const double a = 1.0 - std::exp(-2.0 * kPi * cutoff_ghz / sample_rate_ghz);
    Eigen::ArrayXd out(samples.size());
    double state = samples[0]; // assume the drive was held at its first value
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        state += a * (samples[i] - state);
        out[i] = state;
    }
    return out;
}

double mzm_transmission(const MzmModel& model, double drive_v) {
    model.validate();
    if (model.transfer == MzmTransfer::Linear) return std::clamp(drive_v, 0.0, 1.0);
    const double s = std::sin(kPi * (drive_v + model.bias_v) / (2.0 * model.v_pi_v));
    return s * s;
}

Eigen::ArrayXd mzm_modulate(const MzmModel& model, double input_power_mw,
                            const Eigen::ArrayXd& drive_v, double sample_rate_ghz) {
    model.validate();
    if (!(input_power_mw >= 0.0)) throw InvalidParameter("input power must be >= 0");
    if (!(sample_rate_ghz > 0.0)) throw InvalidParameter("sample rate must be positive");
    if (drive_v.size() == 0) return drive_v;

    Eigen::ArrayXd v = drive_v;
    if (model.delay_ps != 0.0)
        v = delay_samples(v, model.delay_ps * sample_rate_ghz * 1e-3);
    v = lowpass_single_pole(v, model.bandwidth_ghz, sample_rate_ghz);

    const double scale = input_power_mw * db_to_linear(model.insertion_loss_db);
    Eigen::ArrayXd out(v.size());
    if (model.transfer == MzmTransfer::Linear) {
        out = scale * v.min(1.0).max(0.0);
    } else {
        out = scale * (kPi * (v + model.bias_v) / (2.0 * model.v_pi_v)).sin().square();
    }
    return out;
}

std::pair<CombSpectrum, CombSpectrum> microring_split(const CombSpectrum& spectrum,
                                                      const std::vector<int>& selected_teeth) {
    spectrum.validate();
    CombSpectrum selected = spectrum;
    CombSpectrum rest = spectrum;
    selected.power_mw.setZero();
    for (int t : selected_teeth) {
        if (t < 0 || t >= spectrum.grid.tooth_count)
            throw InvalidParameter("selected tooth " + std::to_string(t) + " outside the grid");
        selected.power_mw[t] = spectrum.power_mw[t];
        rest.power_mw[t] = 0.0;
    }
    return {std::move(selected), std::move(rest)};
}

double balanced_detect(const PhotodetectorModel& pd, double plus_mw, double minus_mw,
                       std::uint64_t seed) {
    pd.validate();
    if (plus_mw < 0.0 || minus_mw < 0.0) throw InvalidParameter("detector power must be >= 0");
    double current_ma = pd.responsivity_a_per_w * (plus_mw - minus_mw);
    if (pd.noise_sigma_ma > 0.0) {
        NoiseStream noise(seed);
        current_ma += noise.gaussian(pd.noise_sigma_ma);
    }
    return current_ma;
}

void write_spectrum_csv(const CombSpectrum& comb, const std::string& path) {
    comb.validate();
    csv::Table table({"tooth", "frequency_ghz", "power_mw"});
    for (int t = 0; t < comb.grid.tooth_count; ++t)
        table.add_row({csv::format_int(t), csv::format_double(comb.grid.frequency_ghz(t)),
                       csv::format_double(comb.power_mw[t])});
    table.save(path);
}

} // namespace ocsim::photonics
