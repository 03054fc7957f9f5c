#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ocsim/energy.hpp"
#include "ocsim/errors.hpp"

#include <cmath>
#include <string>

using namespace ocsim;
using namespace ocsim::energy;

TEST_CASE("pumped laser wall draw") {
    // 16 dBm emission at 30% wall-plug efficiency plus a 1.3 mW cooler.
    CHECK(laser_power_mw(16.0, 0.3, 1.3) == doctest::Approx(134.0).epsilon(1e-4));
    CHECK(laser_power_mw(0.0, 1.0, 0.0) == doctest::Approx(1.0));
    // +3.0103 dB doubles the emission, hence the electrical term.
    CHECK(laser_power_mw(19.0103, 0.3, 0.0) ==
          doctest::Approx(2.0 * laser_power_mw(16.0, 0.3, 0.0)).epsilon(1e-5));
    CHECK_THROWS_AS(laser_power_mw(16.0, 0.0, 1.3), InvalidParameter);
    CHECK_THROWS_AS(laser_power_mw(16.0, 1.3, 1.3), InvalidParameter);
    CHECK_THROWS_AS(laser_power_mw(16.0, 0.3, -0.1), InvalidParameter);
}

TEST_CASE("receiver dissipation") {
    CHECK(pd_power_mw(0.65, 2.0, 3.0) == doctest::Approx(3.9));
    CHECK(pd_power_mw(0.65, 2.0, 0.0) == 0.0);
    CHECK(pd_power_mw(0.65, 2.0, 6.0) == doctest::Approx(2.0 * pd_power_mw(0.65, 2.0, 3.0)));
    CHECK_THROWS_AS(pd_power_mw(0.0, 2.0, 3.0), InvalidParameter);
    CHECK_THROWS_AS(pd_power_mw(0.65, 2.0, -1.0), InvalidParameter);
}

TEST_CASE("amplifier pump budget") {
    CHECK(edfa_pump_power_mw(0.1, 3.1, 0.3) == doctest::Approx(10.0));
    CHECK(edfa_pump_power_mw(2.0, 2.0, 0.3) == 0.0);
    // Half the conversion efficiency needs twice the pump.
    CHECK(edfa_pump_power_mw(0.1, 3.1, 0.15) == doctest::Approx(20.0));
    CHECK_THROWS_AS(edfa_pump_power_mw(3.1, 0.1, 0.3), InvalidParameter);
    CHECK_THROWS_AS(edfa_pump_power_mw(0.1, 3.1, 0.0), InvalidParameter);
    CHECK_THROWS_AS(edfa_pump_power_mw(0.1, 3.1, 1.5), InvalidParameter);
}

TEST_CASE("default bill of materials totals") {
    const ComponentPowerTable table = ComponentPowerTable::defaults();
    const BillOfMaterials bom = BillOfMaterials::defaults();

    const PowerReport compute = total_power(table, bom, Scope::ComputeOnly);
    const PowerReport control = total_power(table, bom, Scope::ComputeControl);
    const PowerReport full = total_power(table, bom, Scope::FullSystem);
    CHECK(compute.total_mw == doctest::Approx(106.8).epsilon(1e-4));
    CHECK(control.total_mw == doctest::Approx(426.92).epsilon(1e-4));
    CHECK(full.total_mw == doctest::Approx(614.36).epsilon(1e-4));

    // Each report's subtotals add up to its own total.
    for (const PowerReport* r : {&compute, &control, &full}) {
        double sum = 0.0;
        for (double s : r->subtotal_mw) sum += s;
        CHECK(sum == doctest::Approx(r->total_mw));
    }

    // The compute scope carries no converters; the control scope does.
    CHECK(compute.subtotal_mw[static_cast<std::size_t>(Component::Dac)] == 0.0);
    CHECK(control.subtotal_mw[static_cast<std::size_t>(Component::Dac)] ==
          doctest::Approx(8.0 * table[Component::Dac]));
    CHECK(full.subtotal_mw[static_cast<std::size_t>(Component::Laser)] ==
          doctest::Approx(137.7));
}

TEST_CASE("scope widening never sheds power") {
    const ComponentPowerTable table = ComponentPowerTable::defaults();
    const BillOfMaterials bom = BillOfMaterials::defaults();
    const double compute = total_power(table, bom, Scope::ComputeOnly).total_mw;
    const double control = total_power(table, bom, Scope::ComputeControl).total_mw;
    const double full = total_power(table, bom, Scope::FullSystem).total_mw;
    CHECK(compute < control);
    CHECK(control < full);
}

TEST_CASE("totals are linear in the device counts") {
    const ComponentPowerTable table = ComponentPowerTable::defaults();
    BillOfMaterials a = BillOfMaterials::defaults();
    BillOfMaterials b = BillOfMaterials::defaults();
    b.count(Scope::ComputeOnly, Component::Mzm) = 1;
    b.count(Scope::ComputeControl, Component::Mzm) = 2;
    b.count(Scope::FullSystem, Component::Mzm) = 2;

    BillOfMaterials sum = a;
    for (int s = 0; s < kScopeCount; ++s)
        for (int c = 0; c < kComponentCount; ++c)
            sum.counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)] +=
                b.counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)];

    for (Scope scope : {Scope::ComputeOnly, Scope::ComputeControl, Scope::FullSystem})
        CHECK(total_power(table, sum, scope).total_mw ==
              doctest::Approx(total_power(table, a, scope).total_mw +
                              total_power(table, b, scope).total_mw));
}

TEST_CASE("power per throughput") {
    CHECK(efficiency_mw_per_tops(106.8, 3.6) == doctest::Approx(29.67).epsilon(2e-3));
    CHECK(efficiency_mw_per_tops(426.92, 3.6) == doctest::Approx(118.59).epsilon(1e-3));
    CHECK(efficiency_mw_per_tops(55.5, 1.0) == doctest::Approx(55.5));
    CHECK_THROWS_AS(efficiency_mw_per_tops(106.8, 0.0), InvalidParameter);
    CHECK_THROWS_AS(efficiency_mw_per_tops(-1.0, 3.6), InvalidParameter);
}

TEST_CASE("names round trip") {
    for (int c = 0; c < kComponentCount; ++c) {
        const auto comp = static_cast<Component>(c);
        CHECK(component_from_name(component_name(comp)) == comp);
    }
    for (int s = 0; s < kScopeCount; ++s) {
        const auto scope = static_cast<Scope>(s);
        CHECK(scope_from_name(scope_name(scope)) == scope);
    }
    CHECK(std::string(component_name(Component::EdfaPump)) == "edfa_pump");
    CHECK(std::string(scope_name(Scope::FullSystem)) == "full_system");
    CHECK_THROWS_AS(component_from_name("flux_capacitor"), ConfigError);
    CHECK_THROWS_AS(scope_from_name("lab"), ConfigError);
}

TEST_CASE("table and count validation") {
    ComponentPowerTable bad = ComponentPowerTable::defaults();
    bad[Component::Adc] = -0.5;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad[Component::Adc] = std::nan("");
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);

    BillOfMaterials negative = BillOfMaterials::defaults();
    negative.count(Scope::ComputeOnly, Component::Pd) = -1;
    CHECK_THROWS_AS(negative.validate(), InvalidParameter);

    // A wider scope must keep every device of the narrower one.
    BillOfMaterials shedding = BillOfMaterials::defaults();
    shedding.count(Scope::ComputeControl, Component::Pd) =
        shedding.count(Scope::ComputeOnly, Component::Pd) - 1;
    CHECK_THROWS_AS(shedding.validate(), InvalidParameter);

    CHECK_NOTHROW(BillOfMaterials::defaults().validate());
    CHECK_NOTHROW(ComponentPowerTable::defaults().validate());
}
