#include "abacf/feature_protocol.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>

#include "abacf/errors.hpp"

namespace abacf::features {

namespace {

constexpr std::uint8_t kRequestMagic[4] = {'B', 'A', 'C', 'F'};
constexpr std::uint8_t kResponseMagic[4] = {'B', 'A', 'C', 'R'};
// Upper bound on values in one conv payload; guards allocation on garbage.
constexpr std::uint64_t kMaxTensorValues = std::uint64_t{1} << 28;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::uint32_t read_u32(const ReadExact& read) {
  std::uint8_t buf[4];
  read(buf);
  return get_u32(buf);
}

void check_finite(float v) {
  if (!std::isfinite(v)) throw TransportError("non-finite value in feature payload");
}

}  // namespace

std::vector<std::uint8_t> encode_request(const Image& patch, FeatureKinds kinds) {
  if (patch.empty()) throw InputError("encode_request: empty patch");
  std::vector<std::uint8_t> out;
  out.reserve(14 + patch.pixels.size());
  for (std::uint8_t b : kRequestMagic) out.push_back(b);
  out.push_back(kProtocolVersion);
  out.push_back(kinds.mask());
  put_u32(out, static_cast<std::uint32_t>(patch.height));
  put_u32(out, static_cast<std::uint32_t>(patch.width));
  out.insert(out.end(), patch.pixels.begin(), patch.pixels.end());
  return out;
}

FeatureRequest decode_request(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14) throw TransportError("request shorter than its header");
  if (std::memcmp(bytes.data(), kRequestMagic, 4) != 0) throw TransportError("bad request magic");
  if (bytes[4] != kProtocolVersion) throw TransportError("unsupported protocol version");
  if ((bytes[5] & ~3u) != 0) throw TransportError("unknown kinds bits");
  const std::uint32_t h = get_u32(bytes.data() + 6);
  const std::uint32_t w = get_u32(bytes.data() + 10);
  if (h == 0 || w == 0) throw TransportError("empty patch in request");
  const std::uint64_t n = std::uint64_t{3} * h * w;
  if (bytes.size() - 14 != n) throw TransportError("request pixel payload has the wrong length");
  FeatureRequest req{FeatureKinds::from_mask(bytes[5]),
                     Image(static_cast<int>(w), static_cast<int>(h))};
  std::copy(bytes.begin() + 14, bytes.end(), req.patch.pixels.begin());
  return req;
}

std::vector<std::uint8_t> encode_response(const FeatureResponse& response, FeatureKinds requested) {
  if (requested.conv_stack != response.conv.has_value() || requested.fc7 != response.fc7.has_value()) {
    throw InputError("encode_response: payload does not match the requested kinds");
  }
  std::vector<std::uint8_t> out(std::begin(kResponseMagic), std::end(kResponseMagic));
  out.push_back(0);
  if (response.conv) {
    const FeatureTensor& t = *response.conv;
    put_u32(out, static_cast<std::uint32_t>(t.height()));
    put_u32(out, static_cast<std::uint32_t>(t.width()));
    put_u32(out, static_cast<std::uint32_t>(t.channels()));
    for (int r = 0; r < t.height(); ++r)
      for (int c = 0; c < t.width(); ++c)
        for (int ch = 0; ch < t.channels(); ++ch) put_f32(out, t.at(r, c, ch));
  }
  if (response.fc7) {
    put_u32(out, static_cast<std::uint32_t>(response.fc7->dim()));
    for (double v : response.fc7->values) put_f32(out, v);
  }
  return out;
}

std::vector<std::uint8_t> encode_error_response() {
  std::vector<std::uint8_t> out(std::begin(kResponseMagic), std::end(kResponseMagic));
  out.push_back(1);
  return out;
}

FeatureResponse read_response(const ReadExact& read, FeatureKinds requested,
                              std::size_t expected_fc7_dim) {
  std::uint8_t header[5];
  read(header);
  if (std::memcmp(header, kResponseMagic, 4) != 0) throw TransportError("bad response magic");
  if (header[4] == 1) throw TransportError("feature server reported an error");
  if (header[4] != 0) throw TransportError("unknown response status");

  FeatureResponse out;
  if (requested.conv_stack) {
    const std::uint32_t h = read_u32(read);
    const std::uint32_t w = read_u32(read);
    const std::uint32_t c = read_u32(read);
    const std::uint64_t n = std::uint64_t{h} * w * c;
    if (n == 0 || n > kMaxTensorValues || h > std::numeric_limits<int>::max() ||
        w > std::numeric_limits<int>::max() || c > std::numeric_limits<int>::max()) {
      throw TransportError("implausible conv tensor shape in response");
    }
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(n) * 4);
    read(raw);
    FeatureTensor t(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), 1,
                    FeatureKind::DeepRemote);
    const std::uint8_t* p = raw.data();
    for (std::uint32_t r = 0; r < h; ++r)
      for (std::uint32_t col = 0; col < w; ++col)
        for (std::uint32_t ch = 0; ch < c; ++ch, p += 4) {
          const float v = get_f32(p);
          check_finite(v);
          t.at(static_cast<int>(r), static_cast<int>(col), static_cast<int>(ch)) = v;
        }
    out.conv = std::move(t);
  }
  if (requested.fc7) {
    const std::uint32_t dim = read_u32(read);
    if (dim == 0 || dim > kMaxTensorValues) throw TransportError("implausible fc7 dimension");
    if (expected_fc7_dim != 0 && dim != expected_fc7_dim) {
      throw TransportError("fc7 dimension " + std::to_string(dim) + " (expected " +
                           std::to_string(expected_fc7_dim) + ")");
    }
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(dim) * 4);
    read(raw);
    DescriptorVector d;
    d.values.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      const float v = get_f32(raw.data() + 4 * i);
      check_finite(v);
      d.values[i] = v;
    }
    out.fc7 = std::move(d);
  }
  return out;
}

FeatureResponse decode_response(std::span<const std::uint8_t> bytes, FeatureKinds requested,
                                std::size_t expected_fc7_dim) {
  std::size_t pos = 0;
  auto reader = [&](std::span<std::uint8_t> dst) {
    if (bytes.size() - pos < dst.size()) throw TransportError("truncated response");
    std::memcpy(dst.data(), bytes.data() + pos, dst.size());
    pos += dst.size();
  };
  FeatureResponse out = read_response(reader, requested, expected_fc7_dim);
  if (pos != bytes.size()) throw TransportError("trailing bytes after response frame");
  return out;
}

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ParameterError("endpoint must look like host:port, got '" + text + "'");
  }
  Endpoint e;
  e.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  std::size_t used = 0;
  unsigned long value = 0;
  try {
    value = std::stoul(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port.size() || value == 0 || value > 65535) {
    throw ParameterError("invalid port in endpoint '" + text + "'");
  }
  e.port = static_cast<std::uint16_t>(value);
  return e;
}

FeatureClient::FeatureClient(Endpoint endpoint, std::size_t expected_fc7_dim)
    : endpoint_(std::move(endpoint)), expected_fc7_dim_(expected_fc7_dim) {}

FeatureClient::~FeatureClient() { disconnect(); }

void FeatureClient::disconnect() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void FeatureClient::ensure_connected() {
  if (fd_ >= 0) return;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(endpoint_.port);
  if (int rc = ::getaddrinfo(endpoint_.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + endpoint_.str() + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to feature server at " + endpoint_.str());
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  fd_ = fd;
}

FeatureResponse FeatureClient::request(const Image& patch, FeatureKinds kinds) {
  const std::vector<std::uint8_t> frame = encode_request(patch, kinds);
  ensure_connected();
  try {
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw TransportError("send to " + endpoint_.str() + " failed");
      sent += static_cast<std::size_t>(n);
    }
    auto reader = [this](std::span<std::uint8_t> dst) {
      std::size_t got = 0;
      while (got < dst.size()) {
        const ssize_t n = ::recv(fd_, dst.data() + got, dst.size() - got, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw TransportError("response stream from " + endpoint_.str() + " ended early");
        got += static_cast<std::size_t>(n);
      }
    };
    return read_response(reader, kinds, expected_fc7_dim_);
  } catch (...) {
    // The stream position is unknown after any failure.
    disconnect();
    throw;
  }
}

}  // namespace abacf::features
