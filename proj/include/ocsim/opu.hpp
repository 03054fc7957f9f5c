#pragma once

#include "ocsim/photonics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

namespace ocsim::opu {

// 1-D convolution kernel (tap weights, signed, already in math units).
struct Kernel {
    Eigen::ArrayXd weights;

    int length() const { return static_cast<int>(weights.size()); }
    void validate() const;
};

// Kernel split for the two-band scheme: positive taps land in one router
// cycle, magnitudes of negative taps in the other. positive - negative
// recovers the signed kernel.
struct SplitKernel {
    Eigen::ArrayXd positive;
    Eigen::ArrayXd negative;
};

enum class WeightLayout {
    Contiguous,  // taps occupy residues 0..k-1
    EdgeStraddle // taps straddle the cycle edge, first/last residues
};

// Wavelength bookkeeping for one processing unit. Two adjacent router cycles
// of the comb form one weight page: residue class (support_shift + d) mod N
// carries tap d in both cycles; every other residue is a data channel.
struct WavelengthPlan {
    int port_count = 8;
    int center_alignment = 8; // tooth index of residue 0 in cycle 0
    int positive_cycle = 0;   // teeth [center_alignment, center_alignment + N)
    int negative_cycle = -1;  // teeth [center_alignment - N, center_alignment)
    int kernel_length = 3;
    int support_shift = 0; // residue carrying tap 0

    int tooth_count() const;
    int residue_of(int tooth) const;
    int weight_offset_of(int residue) const; // tap index, or -1 for data residues
    int tooth_of(int cycle, int residue) const;
    std::vector<int> weight_teeth() const; // both cycles, ascending
    std::vector<int> signal_teeth() const; // data residues, both cycles
    std::vector<int> cycle_teeth(int cycle) const;
    void validate() const;
};

// Additive output noise, expressed as RMS error per unit of the operation's
// output full scale at the reference symbol rate, growing as a power law in
// rate. Defaults reproduce the measured addition error spread.
struct NoiseModel {
    double sigma_ref = 0.0984 / 14.0;
    double reference_baud_ghz = 10.0;
    double alpha = 1.5 * 0.6931471805599453 / 1.6094379124341003; // 1.5*ln2/ln5
    std::uint64_t seed = 1;

    void validate() const;
};

double noise_sigma(const NoiseModel& model, double baud_ghz);

enum class OpuMode { Ideal, Noisy };

// One processing unit: router, modulator bank, balanced receivers, data
// converters and a calibrated noise model.
struct OpuConfig {
    photonics::AwgrSpec awgr;
    std::vector<photonics::MzmModel> mzm_array; // one per used input port
    photonics::PhotodetectorModel pd;
    std::vector<int> used_input_ports; // contiguous, ascending
    int dac_bits = 8;
    int adc_bits = 12;
    double baud_ghz = 10.0;
    double comb_tooth_power_mw = 1.0;
    NoiseModel noise;
    OpuMode mode = OpuMode::Ideal;
    WeightLayout layout = WeightLayout::Contiguous;

    int input_length() const { return static_cast<int>(used_input_ports.size()); }
    void validate() const;
};

// Convenience: a unit with n contiguous ports driven, everything else default.
OpuConfig default_opu(int port_count = 8, int used_ports = 8);

// Output of one full-vector pass. port_outputs holds the cyclic correlation
// on every router port; valid() extracts the linear (no wrap) window.
struct OpuResult {
    Eigen::ArrayXd port_outputs;
    int valid_offset = 0;
    int valid_count = 0;

    Eigen::ArrayXd valid() const;
};

SplitKernel split_kernel(const Kernel& kernel);

// Scales the kernel so its largest magnitude is 1 (loadable as attenuations).
// Returns the normalized kernel and the scale that undoes it.
std::pair<Kernel, double> normalize_kernel(const Kernel& kernel);

WavelengthPlan plan_wavelengths(const photonics::AwgrSpec& awgr, int kernel_length,
                                WeightLayout layout = WeightLayout::Contiguous);

// Weight page as a waveshaper profile over an equalized comb: weight teeth
// attenuate to the tap magnitude, data teeth pass untouched.
photonics::WaveshaperProfile load_weights(const WavelengthPlan& plan, const SplitKernel& split,
                                          const photonics::CombSpectrum& comb);

// Full pipeline for one input vector x (one sample per used port, values in
// [0, 1]): comb, weight page, modulator bank, cyclic routing, band split,
// balanced detection, rescale to math units. Noisy mode adds converter
// quantization and the rate-dependent noise draw (stream derived from
// config.noise.seed and the call seed).
OpuResult opu_convolve(const OpuConfig& config, const Kernel& kernel, const Eigen::ArrayXd& x,
                       std::uint64_t seed);

// Correlates an arbitrary-length row against the kernel by streaming
// overlapping chunks through the unit. Output length is row - k + 1.
Eigen::ArrayXd opu_correlate_row(const OpuConfig& config, const Eigen::ArrayXd& row,
                                 const Kernel& kernel, std::uint64_t seed);

enum class ElementaryOp { Multiply, Add, Subtract, Mac };

// Scalar ops mapped onto the pipeline. multiply: a*b (b loaded as the
// weight); add/subtract: two-tap kernels; mac: dot(a, b). Operands in [0, 1]
// (magnitudes for weights).
double elementary_op(const OpuConfig& config, ElementaryOp op, const Eigen::ArrayXd& a,
                     const Eigen::ArrayXd& b, std::uint64_t seed);

// log2(full_scale / rms(errors)); +inf for a zero-error trace.
double measure_enob(const Eigen::ArrayXd& errors, double full_scale);

// Randomized precision benchmark of one elementary op in integer units.
// Operands are `levels`-level integers (0..levels-1) mapped onto [0, 1];
// weight-side draws avoid the degenerate all-zero page (multiply never draws
// a zero weight, mac redraws an all-zero weight vector). `normalized` holds
// error / per-trial output full scale — the convention behind the ENOB
// figures, constant-FS for add/subtract, per-trial for multiply/mac.
struct ElementaryBenchmark {
    Eigen::ArrayXd ideal;      // exact results, integer units
    Eigen::ArrayXd computed;   // unit results, integer units
    Eigen::ArrayXd error;      // computed - ideal
    Eigen::ArrayXd normalized; // error / per-trial full scale
    double error_std = 0.0;    // sample std of `error`
    double enob = 0.0;         // log2(1 / rms(normalized))
};

ElementaryBenchmark benchmark_elementary(const OpuConfig& config, ElementaryOp op, int trials,
                                         int levels, int mac_length, std::uint64_t seed);

// Peak multiply-accumulate throughput in TOPS for an N-port unit running a
// k-tap kernel at baud_ghz: (N-k+1) outputs * 2k ops * 2 bands per symbol.
double peak_tops(int port_count, int kernel_length, double baud_ghz);

// Mid-rise quantizers used by the converter stages (exposed for tests).
double quantize_unit_interval(double x, int bits);        // codes in [0, 1]
double quantize_symmetric(double x, double fs, int bits); // codes in [-fs, fs]

// --- modulator-bank calibration ---------------------------------------------

// Hardware mismatch injected on one modulator relative to nominal.
struct MzmMismatch {
    double bias_offset_v = 0.0;
    double v_pp_ratio = 1.0; // drive-chain gain error
    double delay_ps = 0.0;
};

// Correction the calibration applies to the commanded drive.
struct MzmCorrection {
    double bias_v = 0.0;
    double v_pp_gain = 1.0;
    double delay_ps = 0.0;
};

struct CalibrationSettings {
    int samples = 512;
    int tones = 8;
    double sample_rate_ghz = 10.0;
    double tolerance = 1e-4; // fraction of the reference signal RMS
    int max_sweeps = 100;
    double bias_window_v = 0.0;  // 0 -> 0.35 * v_pi
    double gain_low = 0.5;
    double gain_high = 1.6;
    double delay_window_ps = 0.0; // 0 -> 0.6 symbol periods
    std::uint64_t seed = 42;
};

struct CalibrationReport {
    std::vector<MzmCorrection> corrections; // [0] is the reference, identity
    Eigen::ArrayXd residual_rms;            // per modulator, signal-RMS units
    double signal_rms = 0.0;
    int sweeps = 0;
};

// Aligns every modulator against modulator 0 by driving a shared multitone
// test signal in push-pull and flattening the summed photocurrent (the sum is
// constant exactly when bias, swing and delay match). Throws
// CalibrationError when the residual will not drop below tolerance.
CalibrationReport calibrate_mzm_array(const photonics::MzmModel& nominal,
                                      const std::vector<MzmMismatch>& mismatches,
                                      const CalibrationSettings& settings);

// Inverse of the single-pole drive low-pass, boost capped at max_boost.
Eigen::ArrayXd predistort(const Eigen::ArrayXd& drive, double cutoff_ghz, double sample_rate_ghz,
                          double max_boost = 20.0);

} // namespace ocsim::opu
