#pragma once

#include <array>
#include <string>

namespace ocsim::energy {

enum class Component {
    Laser,
    Mzm,
    Mrm,
    Pd,
    EdfaPump,
    TunableFilter,
    Dac,
    Adc,
    Tec,
};

inline constexpr int kComponentCount = 9;

const char* component_name(Component c);
Component component_from_name(const std::string& name);

// Wall-plug power per device instance, mW.
struct ComponentPowerTable {
    std::array<double, kComponentCount> unit_mw{};

    double& operator[](Component c) { return unit_mw[static_cast<std::size_t>(c)]; }
    double operator[](Component c) const { return unit_mw[static_cast<std::size_t>(c)]; }

    static ComponentPowerTable defaults();
    void validate() const;
};

// Accounting scopes, cumulative: compute adds converters adds transceiver.
enum class Scope { ComputeOnly, ComputeControl, FullSystem };

inline constexpr int kScopeCount = 3;

const char* scope_name(Scope s);
Scope scope_from_name(const std::string& name);

// Device counts per scope. Counts are cumulative: a wider scope includes at
// least every device of the narrower one.
struct BillOfMaterials {
    std::array<std::array<int, kComponentCount>, kScopeCount> counts{};

    int count(Scope s, Component c) const {
        return counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)];
    }
    int& count(Scope s, Component c) {
        return counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)];
    }

    static BillOfMaterials defaults();
    void validate() const;
};

struct PowerReport {
    Scope scope = Scope::ComputeOnly;
    std::array<double, kComponentCount> subtotal_mw{};
    double total_mw = 0.0;
};

// Electrical power of a pumped laser: optical emission / wall-plug efficiency
// plus its temperature controller.
double laser_power_mw(double emission_dbm, double wall_plug_efficiency, double tec_mw);

// Receiver dissipation: photocurrent (responsivity * optical power) times bias.
double pd_power_mw(double responsivity_a_per_w, double bias_v, double received_mw);

// Pump power to lift p_in to p_out at the given conversion efficiency.
double edfa_pump_power_mw(double p_in_mw, double p_out_mw, double efficiency);

PowerReport total_power(const ComponentPowerTable& table, const BillOfMaterials& bom, Scope scope);

double efficiency_mw_per_tops(double total_mw, double tops);

} // namespace ocsim::energy
