#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ocsim/errors.hpp"
#include "ocsim/link.hpp"
#include "ocsim/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

using namespace ocsim;
using namespace ocsim::link;

namespace {

std::vector<std::uint8_t> random_payload(std::size_t bytes, std::uint64_t seed) {
    NoiseStream rng(seed);
    std::vector<std::uint8_t> p(bytes);
    for (auto& b : p) b = static_cast<std::uint8_t>(rng.index(256));
    return p;
}

} // namespace

TEST_CASE("span power budget") {
    LinkModel span; // 1 dBm launch, 80 km at 0.2 dB/km
    CHECK(received_power_dbm(span) == doctest::Approx(-15.0));
    CHECK(span.one_way_delay_ns() == doctest::Approx(400000.0));

    span.fiber_length_km = 0.0;
    CHECK(received_power_dbm(span) == doctest::Approx(1.0));

    span.fiber_length_km = 80.0;
    span.extra_attenuation_db = 1.0;
    CHECK(received_power_dbm(span) == doctest::Approx(-16.0));
    span.extra_attenuation_db = 6.0;
    CHECK(received_power_dbm(span) == doctest::Approx(-21.0));

    span.fiber_length_km = -1.0;
    CHECK_THROWS_AS(received_power_dbm(span), InvalidParameter);
    span.fiber_length_km = 80.0;
    span.extra_attenuation_db = -0.5;
    CHECK_THROWS_AS(span.validate(), InvalidParameter);
}

TEST_CASE("modulation bookkeeping") {
    const PamConfig ook{2, 50.0};
    const PamConfig four{4, 25.0};
    const PamConfig eight{8, 10.0};
    CHECK(ook.bits_per_symbol() == 1);
    CHECK(four.bits_per_symbol() == 2);
    CHECK(eight.bits_per_symbol() == 3);
    CHECK(ook.gross_bitrate_gbps() == doctest::Approx(50.0));
    CHECK(four.gross_bitrate_gbps() == doctest::Approx(50.0));

    FecConfig fec;
    CHECK(fec.net_bitrate_gbps(four) == doctest::Approx(37.5));

    const PamConfig odd{3, 25.0};
    const PamConfig unary{1, 25.0};
    const PamConfig stalled{4, 0.0};
    CHECK_THROWS_AS(odd.validate(), InvalidParameter);
    CHECK_THROWS_AS(unary.validate(), InvalidParameter);
    CHECK_THROWS_AS(stalled.validate(), InvalidParameter);
    const FecConfig zero_rate{0.0, 2e-2};
    const FecConfig over_unity{1.2, 2e-2};
    const FecConfig hopeless{0.75, 0.5};
    CHECK_THROWS_AS(zero_rate.validate(), InvalidParameter);
    CHECK_THROWS_AS(over_unity.validate(), InvalidParameter);
    CHECK_THROWS_AS(hopeless.validate(), InvalidParameter);
}

TEST_CASE("error ratio versus received power") {
    const RopBerCurve curve;
    const PamConfig pam; // four levels

    // Strong signal: the error ratio vanishes.
    CHECK(ber_from_rop(curve, 20.0, pam) < 1e-300);

    // The margins around the correction threshold.
    CHECK(ber_from_rop(curve, -21.0, pam) <= 2e-2);
    CHECK(std::abs(ber_from_rop(curve, -21.0, pam) - 0.0152) < 2e-4);
    CHECK(ber_from_rop(curve, -22.0, pam) > 2e-2);
    CHECK(std::abs(ber_from_rop(curve, -22.0, pam) - 0.0255) < 2e-4);

    // Strictly decreasing over a 20-point sweep.
    double prev = 1.0;
    for (int i = 0; i < 20; ++i) {
        const double rop = -30.0 + 25.0 * i / 19.0;
        const double ber = ber_from_rop(curve, rop, pam);
        CHECK(ber < prev);
        prev = ber;
    }

    // Binary modulation has the single-boundary form.
    const double snr = std::pow(10.0, (-25.0 - curve.noise_floor_dbm) / 10.0);
    const double want = 0.5 * std::erfc(std::sqrt(snr) / std::sqrt(2.0));
    const PamConfig binary{2, 50.0};
    CHECK(std::abs(ber_from_rop(curve, -25.0, binary) / want - 1.0) < 1e-12);
}

TEST_CASE("payload survives the span inside the correction budget") {
    LinkModel span;
    const PamConfig pam;
    const FecConfig fec;
    const RopBerCurve curve;
    const auto payload = random_payload(65536, 123);

    span.extra_attenuation_db = 6.0; // -21 dBm received
    const auto [bytes6, stats6] = transmit_payload(payload, span, pam, fec, curve, 9);
    CHECK(stats6.rop_dbm == doctest::Approx(-21.0));
    CHECK(stats6.decoded);
    CHECK(bytes6 == payload); // bit-exact after correction
    CHECK(stats6.bits == 8LL * 65536);
    CHECK(stats6.pre_fec_ber ==
          doctest::Approx(static_cast<double>(stats6.bit_errors) / stats6.bits));
    // The sampled channel reproduces the analytic error ratio.
    CHECK(std::abs(stats6.pre_fec_ber / ber_from_rop(curve, -21.0, pam) - 1.0) < 0.10);

    span.extra_attenuation_db = 7.0; // -22 dBm: past the budget
    const auto [bytes7, stats7] = transmit_payload(payload, span, pam, fec, curve, 9);
    CHECK_FALSE(stats7.decoded);
    CHECK(bytes7 != payload);
    CHECK(stats7.pre_fec_ber > fec.pre_fec_ber_threshold);
    CHECK(std::abs(stats7.pre_fec_ber / ber_from_rop(curve, -22.0, pam) - 1.0) < 0.10);
}

TEST_CASE("clean channel delivers zero errors") {
    LinkModel span;
    span.fiber_length_km = 0.0; // 1 dBm straight in
    const auto payload = random_payload(4096, 5);
    const auto [bytes, stats] = transmit_payload(payload, span, PamConfig{}, FecConfig{},
                                                 RopBerCurve{}, 77);
    CHECK(stats.bit_errors == 0);
    CHECK(stats.pre_fec_ber == 0.0);
    CHECK(stats.decoded);
    CHECK(bytes == payload);
}

TEST_CASE("channel noise is seeded") {
    LinkModel span;
    span.extra_attenuation_db = 7.0;
    const auto payload = random_payload(8192, 31);
    const auto [a_bytes, a] = transmit_payload(payload, span, PamConfig{}, FecConfig{},
                                               RopBerCurve{}, 1);
    const auto [b_bytes, b] = transmit_payload(payload, span, PamConfig{}, FecConfig{},
                                               RopBerCurve{}, 1);
    CHECK(a.bit_errors == b.bit_errors);
    CHECK(a_bytes == b_bytes);

    const auto [c_bytes, c] = transmit_payload(payload, span, PamConfig{}, FecConfig{},
                                               RopBerCurve{}, 2);
    CHECK(c_bytes != a_bytes); // different error pattern
}

TEST_CASE("degrading attenuation walks the error ratio up") {
    LinkModel span;
    const auto payload = random_payload(16384, 47);
    double prev = -1.0;
    for (double extra : {0.0, 3.0, 5.0, 6.0, 7.0, 8.0}) {
        span.extra_attenuation_db = extra;
        const auto [bytes, stats] =
            transmit_payload(payload, span, PamConfig{}, FecConfig{}, RopBerCurve{}, 13);
        CHECK(stats.pre_fec_ber >= prev);
        prev = stats.pre_fec_ber;
        CHECK(stats.decoded == (extra <= 6.0));
    }
}

TEST_CASE("transmit rejects bad inputs") {
    const std::vector<std::uint8_t> empty;
    CHECK_THROWS_AS(
        transmit_payload(empty, LinkModel{}, PamConfig{}, FecConfig{}, RopBerCurve{}, 1),
        InvalidParameter);
    LinkModel bad;
    bad.fiber_loss_db_per_km = -0.2;
    CHECK_THROWS_AS(transmit_payload(random_payload(16, 1), bad, PamConfig{}, FecConfig{},
                                     RopBerCurve{}, 1),
                    InvalidParameter);
    CHECK_THROWS_AS(transmit_payload(random_payload(16, 1), LinkModel{}, PamConfig{6, 25.0},
                                     FecConfig{}, RopBerCurve{}, 1),
                    InvalidParameter);
}
