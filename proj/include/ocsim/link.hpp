#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace ocsim::link {

// Point-to-point fiber span between an edge node and the computing center.
struct LinkModel {
    double launch_power_dbm = 1.0;
    double fiber_length_km = 80.0;
    double fiber_loss_db_per_km = 0.2;
    double extra_attenuation_db = 0.0;
    double propagation_delay_us_per_km = 5.0;

    double one_way_delay_ns() const { return fiber_length_km * propagation_delay_us_per_km * 1e3; }
    void validate() const;
};

// Multi-level intensity modulation; levels must be a power of two.
struct PamConfig {
    int levels = 4;
    double baud_ghz = 25.0;

    int bits_per_symbol() const;
    double gross_bitrate_gbps() const { return baud_ghz * bits_per_symbol(); }
    void validate() const;
};

// Forward error correction as a budget abstraction: payloads decode exactly
// when the raw channel error ratio is at or below the threshold.
struct FecConfig {
    double code_rate = 0.75;
    double pre_fec_ber_threshold = 2e-2;

    double net_bitrate_gbps(const PamConfig& pam) const {
        return pam.gross_bitrate_gbps() * code_rate;
    }
    void validate() const;
};

// Receiver sensitivity model: SNR (dB) = received power (dBm) - noise floor.
struct RopBerCurve {
    double noise_floor_dbm = -36.77;
};

double received_power_dbm(const LinkModel& link);

// Gaussian-channel symbol error model with gray mapping:
//   BER = 2(L-1) / (L log2 L) * Q(sqrt(SNR) / (L-1))
double ber_from_rop(const RopBerCurve& curve, double rop_dbm, const PamConfig& pam);

struct TransmitStats {
    double rop_dbm = 0.0;
    double pre_fec_ber = 0.0;
    long long bit_errors = 0;
    long long bits = 0;
    bool decoded = false;
};

// Sends a payload across the span: gray-mapped symbols, additive gaussian
// amplitude noise matching the BER model, hard decision, FEC threshold test.
// Returns the delivered bytes (bit-exact when decoded) and the channel stats.
std::pair<std::vector<std::uint8_t>, TransmitStats>
transmit_payload(const std::vector<std::uint8_t>& payload, const LinkModel& link,
                 const PamConfig& pam, const FecConfig& fec, const RopBerCurve& curve,
                 std::uint64_t seed);

} // namespace ocsim::link
