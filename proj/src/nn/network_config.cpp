#include "insitu/nn/network.hpp"

#include <iomanip>
#include <sstream>

namespace insitu::nn {

using nlohmann::json;

Index NetworkConfig::length_at(std::size_t b) const {
  Index len = input_length;
  for (std::size_t i = 0; i < b && i + 1 < channels.size(); ++i) len /= pool;
  return len;
}

void NetworkConfig::validate() const {
  if (input_length < 1 || input_channels != 2) {
    throw std::invalid_argument("network input must be two channels of positive length");
  }
  if (channels.empty() || dense.empty()) throw std::invalid_argument("network needs conv blocks and dense layers");
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd for same padding");
  if (convs_per_block < 2) throw std::invalid_argument("residual blocks need at least two convolutions");
  if (pool < 1) throw std::invalid_argument("pool size must be positive");
  for (Index c : channels) {
    if (c < 1) throw std::invalid_argument("channel counts must be positive");
  }
  for (Index d : dense) {
    if (d < 1) throw std::invalid_argument("dense widths must be positive");
  }
  if (length_at(channels.size()) < 1) throw std::invalid_argument("pooling collapses the sequence");
  if (output_length() != input_length) {
    throw std::invalid_argument("output width must equal the grid length");
  }
}

json NetworkConfig::to_json() const {
  return {{"input_length", input_length}, {"input_channels", input_channels},
          {"channels", channels},         {"kernel", kernel},
          {"convs_per_block", convs_per_block}, {"pool", pool},
          {"dense", dense}};
}

NetworkConfig NetworkConfig::from_json(const json& j) {
  NetworkConfig c;
  c.input_length = j.value("input_length", c.input_length);
  c.input_channels = j.value("input_channels", c.input_channels);
  c.channels = j.value("channels", c.channels);
  c.kernel = j.value("kernel", c.kernel);
  c.convs_per_block = j.value("convs_per_block", c.convs_per_block);
  c.pool = j.value("pool", c.pool);
  c.dense = j.value("dense", c.dense);
  c.validate();
  return c;
}

std::vector<ParameterSlot> parameter_layout(const NetworkConfig& cfg) {
  cfg.validate();
  std::vector<ParameterSlot> slots;
  Index offset = 0;
  const auto add = [&](std::string name, Index rows, Index cols, bool weight) {
    slots.push_back({std::move(name), offset, rows, cols, weight});
    offset += rows * cols;
  };
  Index cin = cfg.input_channels;
  for (std::size_t b = 0; b < cfg.channels.size(); ++b) {
    for (Index c = 0; c < cfg.convs_per_block; ++c) {
      const std::string name = "block" + std::to_string(b + 1) + ".conv" + std::to_string(c + 1);
      add(name + ".weight", cfg.channels[b], cin * cfg.kernel, true);
      add(name + ".bias", cfg.channels[b], 1, false);
      cin = cfg.channels[b];
    }
  }
  Index in = cfg.flatten_size() + 1;
  for (std::size_t d = 0; d < cfg.dense.size(); ++d) {
    const std::string name = "dense" + std::to_string(d + 1);
    add(name + ".weight", cfg.dense[d], in, true);
    add(name + ".bias", cfg.dense[d], 1, false);
    in = cfg.dense[d];
  }
  return slots;
}

Index parameter_count(const NetworkConfig& cfg) {
  Index n = 0;
  for (const auto& s : parameter_layout(cfg)) n += s.size();
  return n;
}

std::string parameter_table(const NetworkConfig& cfg) {
  std::ostringstream out;
  Index total = 0;
  for (const auto& s : parameter_layout(cfg)) {
    out << std::left << std::setw(22) << s.name << std::right << std::setw(5) << s.rows << " x "
        << std::setw(4) << s.cols << std::setw(10) << s.size() << '\n';
    total += s.size();
  }
  out << std::left << std::setw(34) << "total" << std::right << std::setw(10) << total << '\n';
  return out.str();
}

void require_parameter_count(const NetworkConfig& cfg, Index expected) {
  const Index n = parameter_count(cfg);
  if (n != expected) {
    throw std::invalid_argument("network has " + std::to_string(n) + " parameters, expected " +
                                std::to_string(expected) + "\n" + parameter_table(cfg));
  }
}

}  // namespace insitu::nn
