// Q population across the three-photon resonance of a motionless ion.
#include <iostream>

#include "nscheme/nscheme.hpp"

int main(int argc, char** argv) {
  using namespace nscheme;
  ConfigInput in = argc > 1 ? load_config(argv[1]) : ConfigInput{};
  if (argc <= 1) {
    in.laser_B.rabi_MHz = 10.0;
    in.laser_B.detuning_MHz = 8.0;
    in.laser_R.rabi_MHz = 2.5;
    in.laser_R.detuning_MHz = 3.0;
    in.laser_C.rabi_MHz = 0.05;
    in.laser_C.detuning_MHz = 5.0;
  }
  ScanSpec spec;
  spec.axis = "laser_R.detuning";
  spec.start = 2.0;
  spec.stop = 4.0;
  spec.points = 801;
  const auto s = run_scan(in, spec);
  for (const auto& p : find_peaks(s, Level::Q, 0.1))
    std::cout << "peak at " << p.location << " MHz, P_Q " << p.height << ", fwhm " << p.fwhm << " MHz\n";
}
