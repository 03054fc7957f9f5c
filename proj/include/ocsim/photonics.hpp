#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ocsim::photonics {

// Uniform optical frequency grid. Tooth i sits at
//   center_thz*1000 + (i - tooth_count/2) * spacing_ghz   [GHz]
// so the tooth at index tooth_count/2 is the grid center.
struct FrequencyGrid {
    double center_thz = 193.4;
    double spacing_ghz = 84.0;
    int tooth_count = 16;

    int center_index() const { return tooth_count / 2; }
    int signed_offset(int tooth) const { return tooth - center_index(); }
    double frequency_ghz(int tooth) const {
        return center_thz * 1e3 + signed_offset(tooth) * spacing_ghz;
    }
    double span_ghz() const { return (tooth_count - 1) * spacing_ghz; }

    void validate() const;
};

bool same_grid(const FrequencyGrid& a, const FrequencyGrid& b);

// A comb: per-tooth optical power on a frequency grid.
struct CombSpectrum {
    FrequencyGrid grid;
    Eigen::ArrayXd power_mw;

    double total_power_mw() const { return power_mw.sum(); }
    void validate() const;
};

// Per-tooth attenuation in dB. kBlocked suppresses a tooth entirely.
struct WaveshaperProfile {
    static constexpr double kBlocked = std::numeric_limits<double>::infinity();

    Eigen::ArrayXd attenuation_db;

    void validate() const;
};

enum class PassbandModel { Ideal, Gaussian };

// Cyclic-router geometry. center_alignment is the tooth index that input
// port p = 0 maps to output port 0 on diffraction order n = 0; residues are
// taken relative to it.
struct AwgrSpec {
    int port_count = 8;
    double channel_spacing_ghz = 84.0;
    int center_alignment = 8;
    PassbandModel passband = PassbandModel::Ideal;
    double gaussian_fwhm_ghz = 42.0;

    double fsr_ghz() const { return port_count * channel_spacing_ghz; }
    void validate() const;
};

enum class MzmTransfer { Linear, Sinusoidal };

struct MzmModel {
    double v_pi_v = 3.5;
    double bias_v = 1.75; // quadrature for the default v_pi
    double v_pp_v = 1.0;
    double bandwidth_ghz = 0.0; // <= 0 disables the drive low-pass
    double delay_ps = 0.0;
    double insertion_loss_db = 0.0;
    MzmTransfer transfer = MzmTransfer::Sinusoidal;

    void validate() const;
};

struct PhotodetectorModel {
    double responsivity_a_per_w = 0.65;
    double bias_v = 2.0;
    double noise_sigma_ma = 0.0; // additive gaussian RMS on the output current

    void validate() const;
};

// Flat-top-ish comb: peak power 1 mW at the center tooth, rolling off by
// flatness_db_per_line per tooth of distance from the center.
CombSpectrum generate_comb(int line_count, double spacing_ghz, double center_thz,
                           double flatness_db_per_line);

// Keeps every keep_every-th tooth (indices 0, k, 2k, ...) and rescales the
// grid spacing accordingly. The grid center must land on a kept tooth.
CombSpectrum decimate_comb(const CombSpectrum& comb, int keep_every);

CombSpectrum apply_waveshaper(const CombSpectrum& comb, const WaveshaperProfile& profile);

// Profile that levels every nonzero tooth down to the weakest one; zero teeth
// come back blocked.
WaveshaperProfile equalize_comb(const CombSpectrum& comb);

// Cyclic route map: q = (p - m) mod N with m the tooth residue.
int awgr_output_port(const AwgrSpec& spec, int input_port, int tooth_index);

// Routes one spectrum per input port to one spectrum per output port.
// Ideal passband moves each tooth wholesale; the gaussian passband spreads a
// tooth over neighbouring ports by its filter response (crosstalk).
std::vector<CombSpectrum> route_spectra(const AwgrSpec& spec,
                                        const std::vector<CombSpectrum>& inputs);

// Drives one carrier through the modulator: fractional delay, single-pole
// drive bandwidth, then the transfer law. Returns output power per sample.
Eigen::ArrayXd mzm_modulate(const MzmModel& model, double input_power_mw,
                            const Eigen::ArrayXd& drive_v, double sample_rate_ghz);

// Static (single-point) transfer through the same model, no dynamics.
double mzm_transmission(const MzmModel& model, double drive_v);

// Splits a spectrum into (selected, rest) by tooth index.
std::pair<CombSpectrum, CombSpectrum> microring_split(const CombSpectrum& spectrum,
                                                      const std::vector<int>& selected_teeth);

// Balanced pair: responsivity * (P+ - P-), output in mA, plus optional
// gaussian current noise drawn from the given seed.
double balanced_detect(const PhotodetectorModel& pd, double plus_mw, double minus_mw,
                       std::uint64_t seed);

// Fractional-sample delay by linear interpolation; edges are held.
Eigen::ArrayXd delay_samples(const Eigen::ArrayXd& samples, double delay_in_samples);

// Single-pole low-pass, y[n] = y[n-1] + a (x[n] - y[n-1]), primed at x[0].
// cutoff <= 0 passes through.
Eigen::ArrayXd lowpass_single_pole(const Eigen::ArrayXd& samples, double cutoff_ghz,
                                   double sample_rate_ghz);

// CSV dump: tooth index, frequency GHz, power mW.
void write_spectrum_csv(const CombSpectrum& comb, const std::string& path);

} // namespace ocsim::photonics
