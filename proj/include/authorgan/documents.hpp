#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace authorgan {

/// JSON array with one object per palette entry: kind, category, display_name,
/// description, graph_layer, executable and params (name, type, required,
/// default, constraint).
const std::string& palette_json();

/// Preset registry: names, display names, default loss/optimizer/process and
/// reference layer lists for latent 100 and data [1,28,28], plus the pairing
/// rule and the benchmark matrix order.
const std::string& presets_json();

/// 64-bit FNV-1a, used for strong ETags on the documents above.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace authorgan
