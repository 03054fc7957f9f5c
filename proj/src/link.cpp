#include "ocsim/link.hpp"

#include "ocsim/errors.hpp"
#include "ocsim/rng.hpp"

#include <cmath>

namespace ocsim::link {

namespace {

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

int gray_encode(int v) { return v ^ (v >> 1); }

int gray_decode(int g) {
    int v = 0;
    for (; g; g >>= 1) v ^= g;
    return v;
}

} // namespace

void LinkModel::validate() const {
    if (!(fiber_length_km >= 0.0)) throw InvalidParameter("fiber length must be >= 0");
    if (!(fiber_loss_db_per_km >= 0.0)) throw InvalidParameter("fiber loss must be >= 0");
    if (!(extra_attenuation_db >= 0.0)) throw InvalidParameter("extra attenuation must be >= 0");
    if (!(propagation_delay_us_per_km >= 0.0))
        throw InvalidParameter("propagation delay must be >= 0");
}

int PamConfig::bits_per_symbol() const {
    int bits = 0;
    for (int l = levels; l > 1; l >>= 1) ++bits;
    return bits;
}

void PamConfig::validate() const {
    if (levels < 2 || (levels & (levels - 1)) != 0)
        throw InvalidParameter("modulation order must be a power of two >= 2");
    if (!(baud_ghz > 0.0)) throw InvalidParameter("baud must be positive");
}

void FecConfig::validate() const {
    if (!(code_rate > 0.0 && code_rate <= 1.0)) throw InvalidParameter("code rate must be in (0, 1]");
    if (!(pre_fec_ber_threshold >= 0.0 && pre_fec_ber_threshold < 0.5))
        throw InvalidParameter("ber threshold must be in [0, 0.5)");
}

double received_power_dbm(const LinkModel& link) {
    link.validate();
    return link.launch_power_dbm - link.fiber_length_km * link.fiber_loss_db_per_km -
           link.extra_attenuation_db;
}

double ber_from_rop(const RopBerCurve& curve, double rop_dbm, const PamConfig& pam) {
    pam.validate();
    const double snr_db = rop_dbm - curve.noise_floor_dbm;
    const double snr = std::pow(10.0, snr_db / 10.0);
    const double l = pam.levels;
    return 2.0 * (l - 1.0) / (l * pam.bits_per_symbol()) *
           q_function(std::sqrt(snr) / (l - 1.0));
}

std::pair<std::vector<std::uint8_t>, TransmitStats>
transmit_payload(const std::vector<std::uint8_t>& payload, const LinkModel& link,
                 const PamConfig& pam, const FecConfig& fec, const RopBerCurve& curve,
                 std::uint64_t seed) {
    link.validate();
    pam.validate();
    fec.validate();
    if (payload.empty()) throw InvalidParameter("empty payload");

    TransmitStats stats;
    stats.rop_dbm = received_power_dbm(link);
    const double snr = std::pow(10.0, (stats.rop_dbm - curve.noise_floor_dbm) / 10.0);
    // Amplitude noise that reproduces the nearest-level BER model: adjacent
    // levels are 1 apart, decision boundaries at half distance.
    const double sigma = std::isinf(snr) ? 0.0 : (pam.levels - 1.0) / (2.0 * std::sqrt(snr));

    const int bits_per_symbol = pam.bits_per_symbol();
    stats.bits = static_cast<long long>(payload.size()) * 8;
    const long long symbol_count = (stats.bits + bits_per_symbol - 1) / bits_per_symbol;

    NoiseStream noise(seed);
    std::vector<std::uint8_t> received(payload.size(), 0);
    long long bit_errors = 0;

    auto payload_bit = [&](long long idx) -> int {
        if (idx >= stats.bits) return 0; // symbol padding
        return (payload[static_cast<std::size_t>(idx >> 3)] >> (7 - (idx & 7))) & 1;
    };

    for (long long s = 0; s < symbol_count; ++s) {
        int group = 0;
        for (int b = 0; b < bits_per_symbol; ++b)
            group = (group << 1) | payload_bit(s * bits_per_symbol + b);
        const int level = gray_decode(group); // transmit amplitude whose gray code is the data
        int hat = level;
        if (sigma > 0.0) {
            const double observed = level + noise.gaussian(sigma);
            hat = static_cast<int>(std::lround(observed));
            hat = std::min(std::max(hat, 0), pam.levels - 1);
        }
        const int group_hat = gray_encode(hat);
        for (int b = 0; b < bits_per_symbol; ++b) {
            const long long idx = s * bits_per_symbol + b;
            if (idx >= stats.bits) break;
            const int bit = (group_hat >> (bits_per_symbol - 1 - b)) & 1;
            if (bit != payload_bit(idx)) ++bit_errors;
            if (bit)
                received[static_cast<std::size_t>(idx >> 3)] |=
                    static_cast<std::uint8_t>(1u << (7 - (idx & 7)));
        }
    }

    stats.bit_errors = bit_errors;
    stats.pre_fec_ber = static_cast<double>(bit_errors) / static_cast<double>(stats.bits);
    stats.decoded = stats.pre_fec_ber <= fec.pre_fec_ber_threshold;
    if (stats.decoded) return {payload, stats}; // FEC recovers the exact payload
    return {std::move(received), stats};
}

} // namespace ocsim::link
