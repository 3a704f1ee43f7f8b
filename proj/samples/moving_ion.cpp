// Time-averaged populations of a trapped ion, co- and counter-propagating blue beam.
#include <iostream>

#include "nscheme/nscheme.hpp"

int main() {
  using namespace nscheme;
  ConfigInput in;
  in.laser_B.rabi_MHz = 10.0;
  in.laser_B.detuning_MHz = 8.0;
  in.laser_R.rabi_MHz = 2.5;
  in.laser_R.detuning_MHz = 3.0;
  in.laser_C.rabi_MHz = 0.05;
  in.laser_C.detuning_MHz = 5.0;
  in.motion.enabled = true;
  in.motion.trap_frequency_MHz = 1.0;

  const auto rest = steady_state(carrier_superoperator(validate(in)));
  std::cout << "at rest        P_Q " << rest.population(Level::Q) << "\n";
  for (double dir : {1.0, -1.0}) {
    in.laser_B.direction = dir;
    in.motion.amplitude_nm = amplitude_for_eta_B(in, 0.1);
    const auto fs = solve_floquet_steady(validate(in));
    std::cout << (dir > 0 ? "co-propagating " : "counter        ") << "P_Q " << fs.populations()[3]
              << "  (order " << fs.order << ")\n";
  }
}
