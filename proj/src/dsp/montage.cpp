#include "neuroloop/dsp/montage.hpp"

#include "neuroloop/errors.hpp"

namespace neuroloop::dsp {

const std::vector<std::string>& standard64_labels() {
  static const std::vector<std::string> labels = {
      "Fp1", "Fz",  "F3",  "F7",  "FT9", "FC5", "FC1", "C3",  "T7",   "TP9", "CP5",
      "CP1", "Pz",  "P3",  "P7",  "O1",  "Oz",  "O2",  "P4",  "P8",   "TP10", "CP6",
      "CP2", "Cz",  "C4",  "T8",  "FT10", "FC6", "FC2", "F4",  "F8",  "Fp2", "AF7",
      "AF3", "AFz", "F1",  "F5",  "FT7", "FC3", "C1",  "C5",  "TP7",  "CP3", "P1",
      "P5",  "PO7", "PO3", "POz", "PO4", "PO8", "P6",  "P2",  "CPz",  "CP4", "TP8",
      "C6",  "C2",  "FC4", "FT8", "F6",  "AF8", "AF4", "F2",  "Iz"};
  return labels;
}

std::vector<std::string> montage_labels(const std::string& name) {
  if (name == "standard64") return standard64_labels();
  throw ConfigurationError("unknown montage: " + name);
}

}  // namespace neuroloop::dsp
