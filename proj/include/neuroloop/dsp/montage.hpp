#pragma once

#include <string>
#include <vector>

namespace neuroloop::dsp {

// 64-channel 10-20 montage (actiCap layout, FCz online reference not recorded).
const std::vector<std::string>& standard64_labels();

// Known montage by name ("standard64"); throws ConfigurationError otherwise.
std::vector<std::string> montage_labels(const std::string& name);

}  // namespace neuroloop::dsp
