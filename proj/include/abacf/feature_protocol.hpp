#pragma once

// Binary patch -> features protocol spoken with the external feature server.
// Little-endian throughout.
//
//   request:  "BACF" | version u8 (=1) | kinds u8 (bit0 conv_stack, bit1 fc7)
//             | height u32 | width u32 | RGB8 pixels row-major (3*H*W bytes)
//   response: "BACR" | status u8 (0 ok, 1 error)
//             | [conv requested] h u32, w u32, c u32, h*w*c f32 row-major channel-minor
//             | [fc7 requested]  dim u32, dim f32
//
// An error response (status 1) ends after the status byte.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abacf/features.hpp"
#include "abacf/image.hpp"

namespace abacf::features {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kFc7Dim = 4096;

struct FeatureKinds {
  bool conv_stack = false;
  bool fc7 = false;

  std::uint8_t mask() const noexcept {
    return static_cast<std::uint8_t>((conv_stack ? 1u : 0u) | (fc7 ? 2u : 0u));
  }
  static FeatureKinds from_mask(std::uint8_t mask) { return {(mask & 1u) != 0, (mask & 2u) != 0}; }
};

struct FeatureRequest {
  FeatureKinds kinds;
  Image patch;
};

struct FeatureResponse {
  std::optional<FeatureTensor> conv;
  std::optional<DescriptorVector> fc7;
};

std::vector<std::uint8_t> encode_request(const Image& patch, FeatureKinds kinds);
// Throws TransportError on any framing deviation.
FeatureRequest decode_request(std::span<const std::uint8_t> bytes);

// f32 payloads: tensor values and descriptor entries are narrowed to float.
std::vector<std::uint8_t> encode_response(const FeatureResponse& response, FeatureKinds requested);
std::vector<std::uint8_t> encode_error_response();

// Fills the whole span or throws TransportError.
using ReadExact = std::function<void(std::span<std::uint8_t>)>;

// Reads one response frame. `expected_fc7_dim` == 0 accepts any dimension.
FeatureResponse read_response(const ReadExact& read, FeatureKinds requested,
                              std::size_t expected_fc7_dim);
FeatureResponse decode_response(std::span<const std::uint8_t> bytes, FeatureKinds requested,
                                std::size_t expected_fc7_dim);

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  // "host:port"; throws ParameterError.
  static Endpoint parse(const std::string& text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

// One TCP connection, one request in flight.
class FeatureClient {
 public:
  explicit FeatureClient(Endpoint endpoint, std::size_t expected_fc7_dim = kFc7Dim);
  ~FeatureClient();
  FeatureClient(const FeatureClient&) = delete;
  FeatureClient& operator=(const FeatureClient&) = delete;

  FeatureResponse request(const Image& patch, FeatureKinds kinds);

 private:
  void ensure_connected();
  void disconnect() noexcept;

  Endpoint endpoint_;
  std::size_t expected_fc7_dim_;
  int fd_ = -1;
};

}  // namespace abacf::features
