#include "ocsim/energy.hpp"

#include "ocsim/errors.hpp"

#include <cmath>

namespace ocsim::energy {

namespace {

constexpr const char* kComponentNames[kComponentCount] = {
    "laser", "mzm", "mrm", "pd", "edfa_pump", "tunable_filter", "dac", "adc", "tec",
};

constexpr const char* kScopeNames[kScopeCount] = {
    "compute_only", "compute_control", "full_system",
};

} // namespace

const char* component_name(Component c) { return kComponentNames[static_cast<std::size_t>(c)]; }

Component component_from_name(const std::string& name) {
    for (int i = 0; i < kComponentCount; ++i)
        if (name == kComponentNames[i]) return static_cast<Component>(i);
    throw ConfigError("unknown component '" + name + "'");
}

const char* scope_name(Scope s) { return kScopeNames[static_cast<std::size_t>(s)]; }

Scope scope_from_name(const std::string& name) {
    for (int i = 0; i < kScopeCount; ++i)
        if (name == kScopeNames[i]) return static_cast<Scope>(i);
    throw ConfigError("unknown scope '" + name + "'");
}

ComponentPowerTable ComponentPowerTable::defaults() {
    ComponentPowerTable t;
    t[Component::Laser] = 137.7;        // 16 dBm emission, measured wall draw incl. cooling
    t[Component::Mzm] = 5.0;
    t[Component::Mrm] = 5.8;
    t[Component::Pd] = 3.9;             // pd_power_mw(0.65, 2.0, 3.0)
    t[Component::EdfaPump] = 10.0;      // edfa_pump_power_mw(0.1, 3.1, 0.3)
    t[Component::TunableFilter] = 20.0;
    t[Component::Dac] = 40.0;
    t[Component::Adc] = 0.02;
    t[Component::Tec] = 1.3;
    return t;
}

void ComponentPowerTable::validate() const {
    for (double v : unit_mw)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidParameter("component powers must be finite and >= 0");
}

BillOfMaterials BillOfMaterials::defaults() {
    BillOfMaterials bom;
    // Compute path: 4 modulators, weight-page filters, 6 balanced pairs.
    bom.count(Scope::ComputeOnly, Component::Mzm) = 4;
    bom.count(Scope::ComputeOnly, Component::TunableFilter) = 2;
    bom.count(Scope::ComputeOnly, Component::Pd) = 12;
    // Control plane adds the converter banks.
    bom.counts[1] = bom.counts[0];
    bom.count(Scope::ComputeControl, Component::Dac) = 8;
    bom.count(Scope::ComputeControl, Component::Adc) = 6;
    // Full system adds the edge transceiver and amplified span.
    bom.counts[2] = bom.counts[1];
    bom.count(Scope::FullSystem, Component::Laser) = 1;
    bom.count(Scope::FullSystem, Component::TunableFilter) += 1;
    bom.count(Scope::FullSystem, Component::Mrm) = 1;
    bom.count(Scope::FullSystem, Component::Pd) += 1;
    bom.count(Scope::FullSystem, Component::EdfaPump) = 2;
    bom.count(Scope::FullSystem, Component::Adc) += 2;
    return bom;
}

void BillOfMaterials::validate() const {
    for (int s = 0; s < kScopeCount; ++s)
        for (int c = 0; c < kComponentCount; ++c) {
            if (counts[s][c] < 0) throw InvalidParameter("device counts must be >= 0");
            if (s > 0 && counts[s][c] < counts[s - 1][c])
                throw InvalidParameter(std::string("scope '") + kScopeNames[s] +
                                       "' drops devices present in '" + kScopeNames[s - 1] +
                                       "' (counts are cumulative)");
        }
}

double laser_power_mw(double emission_dbm, double wall_plug_efficiency, double tec_mw) {
    if (!(wall_plug_efficiency > 0.0 && wall_plug_efficiency <= 1.0))
        throw InvalidParameter("wall-plug efficiency must be in (0, 1]");
    if (tec_mw < 0.0) throw InvalidParameter("cooler power must be >= 0");
    return std::pow(10.0, emission_dbm / 10.0) / wall_plug_efficiency + tec_mw;
}

double pd_power_mw(double responsivity_a_per_w, double bias_v, double received_mw) {
    if (!(responsivity_a_per_w > 0.0)) throw InvalidParameter("responsivity must be positive");
    if (received_mw < 0.0) throw InvalidParameter("received power must be >= 0");
    return responsivity_a_per_w * bias_v * received_mw;
}

double edfa_pump_power_mw(double p_in_mw, double p_out_mw, double efficiency) {
    if (!(efficiency > 0.0 && efficiency <= 1.0))
        throw InvalidParameter("conversion efficiency must be in (0, 1]");
    if (p_out_mw < p_in_mw) throw InvalidParameter("amplifier output below its input");
    return (p_out_mw - p_in_mw) / efficiency;
}

PowerReport total_power(const ComponentPowerTable& table, const BillOfMaterials& bom, Scope scope) {
    table.validate();
    bom.validate();
    PowerReport report;
    report.scope = scope;
    for (int c = 0; c < kComponentCount; ++c) {
        const auto comp = static_cast<Component>(c);
        report.subtotal_mw[c] = bom.count(scope, comp) * table[comp];
        report.total_mw += report.subtotal_mw[c];
    }
    return report;
}

double efficiency_mw_per_tops(double total_mw, double tops) {
    if (!(tops > 0.0)) throw InvalidParameter("throughput must be positive");
    if (!(total_mw >= 0.0)) throw InvalidParameter("power must be >= 0");
    return total_mw / tops;
}

} // namespace ocsim::energy
