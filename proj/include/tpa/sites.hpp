#pragma once

#include <compare>
#include <string>

#include "tpa/tensor.hpp"

namespace tpa {

// Where an adapter can be attached, per conformer block.
enum class Site { AfterBlock = 0, Ffn1 = 1, Ffn2 = 2, Conv = 3 };

struct InsertionSite {
  int block_index = 0;
  Site site = Site::AfterBlock;
  auto operator<=>(const InsertionSite&) const = default;
};

std::string to_string(Site site);
Site parse_site(const std::string& name);

// Pre-activation observation points: adapter bottlenecks plus the frozen
// encoder's FFN inner layers.
enum class StatsSiteKind {
  AdapterAfterBlock = 0,
  AdapterFfn1 = 1,
  AdapterFfn2 = 2,
  AdapterConv = 3,
  Ffn1Inner = 4,
  Ffn2Inner = 5,
};

struct StatsSite {
  int block_index = -1;
  StatsSiteKind kind = StatsSiteKind::AdapterAfterBlock;
  auto operator<=>(const StatsSite&) const = default;
};

std::string to_string(StatsSiteKind kind);
StatsSiteKind parse_stats_site_kind(const std::string& name);
StatsSiteKind adapter_stats_kind(Site site);

// Receives pre-activation values during forward; implementations must not
// modify anything the forward pass reads.
class ActivationProbe {
 public:
  virtual ~ActivationProbe() = default;
  virtual void record(const StatsSite& site, const Tensor& pre_activation) = 0;
};

}  // namespace tpa
