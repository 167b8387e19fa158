#include "tpa/sites.hpp"

#include "tpa/errors.hpp"

namespace tpa {

std::string to_string(Site site) {
  switch (site) {
    case Site::AfterBlock: return "after_block";
    case Site::Ffn1: return "ffn1";
    case Site::Ffn2: return "ffn2";
    case Site::Conv: return "conv";
  }
  throw ConfigError("unknown site");
}

Site parse_site(const std::string& name) {
  if (name == "after_block") return Site::AfterBlock;
  if (name == "ffn1") return Site::Ffn1;
  if (name == "ffn2") return Site::Ffn2;
  if (name == "conv") return Site::Conv;
  throw ConfigError("unknown site: " + name);
}

std::string to_string(StatsSiteKind kind) {
  switch (kind) {
    case StatsSiteKind::AdapterAfterBlock: return "adapter_after_block";
    case StatsSiteKind::AdapterFfn1: return "adapter_ffn1";
    case StatsSiteKind::AdapterFfn2: return "adapter_ffn2";
    case StatsSiteKind::AdapterConv: return "adapter_conv";
    case StatsSiteKind::Ffn1Inner: return "ffn1_inner";
    case StatsSiteKind::Ffn2Inner: return "ffn2_inner";
  }
  throw ConfigError("unknown stats site kind");
}

StatsSiteKind parse_stats_site_kind(const std::string& name) {
  if (name == "adapter_after_block") return StatsSiteKind::AdapterAfterBlock;
  if (name == "adapter_ffn1") return StatsSiteKind::AdapterFfn1;
  if (name == "adapter_ffn2") return StatsSiteKind::AdapterFfn2;
  if (name == "adapter_conv") return StatsSiteKind::AdapterConv;
  if (name == "ffn1_inner") return StatsSiteKind::Ffn1Inner;
  if (name == "ffn2_inner") return StatsSiteKind::Ffn2Inner;
  throw ConfigError("unknown stats site: " + name);
}

StatsSiteKind adapter_stats_kind(Site site) {
  switch (site) {
    case Site::AfterBlock: return StatsSiteKind::AdapterAfterBlock;
    case Site::Ffn1: return StatsSiteKind::AdapterFfn1;
    case Site::Ffn2: return StatsSiteKind::AdapterFfn2;
    case Site::Conv: return StatsSiteKind::AdapterConv;
  }
  throw ConfigError("unknown site");
}

}  // namespace tpa
