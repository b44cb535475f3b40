#include "doctest.h"

#include <cmath>
#include <limits>

#include "abacf/deep_provider.hpp"
#include "abacf/errors.hpp"
#include "abacf/feature_protocol.hpp"
#include "support/stub_server.hpp"

using namespace abacf;
using namespace abacf::features;

namespace {

Image small_patch() {
  Image img(3, 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 13 + 1);
  return img;
}

// Conv tensor 2x3x4 with value(r, c, ch) = r - 0.5 c + 0.25 ch, exactly
// representable in float.
constexpr int kH = 2, kW = 3, kC = 4;
float conv_value(int r, int c, int ch) { return static_cast<float>(r - 0.5 * c + 0.25 * ch); }
float fc7_value(std::size_t i) { return static_cast<float>(static_cast<int>(i % 97) - 48) / 8.0f; }

stub::Bytes conv_section() {
  stub::Bytes b;
  stub::put_u32(b, kH);
  stub::put_u32(b, kW);
  stub::put_u32(b, kC);
  for (int r = 0; r < kH; ++r)
    for (int c = 0; c < kW; ++c)
      for (int ch = 0; ch < kC; ++ch) stub::put_f32(b, conv_value(r, c, ch));
  return b;
}

stub::Bytes fc7_section(std::size_t dim) {
  stub::Bytes b;
  stub::put_u32(b, static_cast<std::uint32_t>(dim));
  for (std::size_t i = 0; i < dim; ++i) stub::put_f32(b, fc7_value(i));
  return b;
}

// Answers exactly the kinds asked for.
stub::Reply honest(const stub::Bytes& req) {
  stub::Bytes out = stub::ok_header();
  if (req[5] & 1u) {
    const auto s = conv_section();
    out.insert(out.end(), s.begin(), s.end());
  }
  if (req[5] & 2u) {
    const auto s = fc7_section(kFc7Dim);
    out.insert(out.end(), s.begin(), s.end());
  }
  return {out, false};
}

Endpoint local(std::uint16_t port) { return Endpoint{"127.0.0.1", port}; }

void check_conv(const FeatureTensor& t) {
  REQUIRE(t.height() == kH);
  REQUIRE(t.width() == kW);
  REQUIRE(t.channels() == kC);
  for (int r = 0; r < kH; ++r)
    for (int c = 0; c < kW; ++c)
      for (int ch = 0; ch < kC; ++ch) CHECK(t.at(r, c, ch) == static_cast<double>(conv_value(r, c, ch)));
}

void check_fc7(const DescriptorVector& d) {
  REQUIRE(d.dim() == kFc7Dim);
  for (std::size_t i = 0; i < d.dim(); ++i) CHECK(d.values[i] == static_cast<double>(fc7_value(i)));
}

}  // namespace

TEST_CASE("request framing is byte exact") {
  const Image p = small_patch();
  const auto bytes = encode_request(p, {true, true});
  stub::Bytes expect{'B', 'A', 'C', 'F', 1, 3};
  stub::put_u32(expect, 2);
  stub::put_u32(expect, 3);
  expect.insert(expect.end(), p.pixels.begin(), p.pixels.end());
  CHECK(bytes == expect);

  const FeatureRequest back = decode_request(bytes);
  CHECK(back.kinds.conv_stack);
  CHECK(back.kinds.fc7);
  CHECK(back.patch.pixels == p.pixels);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_request(bad), TransportError);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(decode_request(bad), TransportError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_request(bad), TransportError);
  bad = bytes;
  bad[5] = 4;
  CHECK_THROWS_AS(decode_request(bad), TransportError);
}

TEST_CASE("response codec matches hand-built frames") {
  stub::Bytes frame = stub::ok_header();
  const auto conv = conv_section();
  const auto fc7 = fc7_section(5);
  frame.insert(frame.end(), conv.begin(), conv.end());
  frame.insert(frame.end(), fc7.begin(), fc7.end());
  const FeatureResponse r = decode_response(frame, {true, true}, 5);
  check_conv(*r.conv);
  CHECK(r.fc7->dim() == 5);
  CHECK(encode_response(r, {true, true}) == frame);

  auto trailing = frame;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_response(trailing, {true, true}, 5), TransportError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{5}, std::size_t{20}, frame.size() - 1}) {
    CHECK_THROWS_AS(decode_response(std::span(frame.data(), cut), {true, true}, 5), TransportError);
  }
  CHECK_THROWS_AS(decode_response(frame, {true, true}, 6), TransportError);

  CHECK_THROWS_AS(decode_response(encode_error_response(), {true, false}, 0), TransportError);

  stub::Bytes nan_frame = stub::ok_header();
  stub::put_u32(nan_frame, 1);
  stub::put_f32(nan_frame, std::numeric_limits<float>::quiet_NaN());
  CHECK_THROWS_AS(decode_response(nan_frame, {false, true}, 0), TransportError);
}

TEST_CASE("client round trip against the stub server is bit exact") {
  stub::Server server(honest);
  FeatureClient client(local(server.port()));
  const FeatureResponse both = client.request(small_patch(), {true, true});
  check_conv(*both.conv);
  check_fc7(*both.fc7);

  const FeatureResponse only_fc7 = client.request(small_patch(), {false, true});
  CHECK(!only_fc7.conv.has_value());
  check_fc7(*only_fc7.fc7);

  const FeatureResponse only_conv = client.request(small_patch(), {true, false});
  CHECK(!only_conv.fc7.has_value());
  check_conv(*only_conv.conv);

  const auto reqs = server.requests();
  REQUIRE(reqs.size() == 3);
  CHECK(reqs[0][5] == 3);
  CHECK(reqs[1][5] == 2);
  CHECK(reqs[2][5] == 1);
  CHECK(reqs[0] == encode_request(small_patch(), {true, true}));
  CHECK(server.connections() == 1);
}

TEST_CASE("truncated stream raises and the client reconnects") {
  int calls = 0;
  stub::Server server([&](const stub::Bytes& req) {
    stub::Reply r = honest(req);
    if (calls++ == 0) {
      r.bytes.resize(r.bytes.size() / 2);
      r.close_after = true;
    }
    return r;
  });
  FeatureClient client(local(server.port()));
  CHECK_THROWS_AS(client.request(small_patch(), {true, true}), TransportError);
  const FeatureResponse ok = client.request(small_patch(), {true, true});
  check_conv(*ok.conv);
  CHECK(server.connections() == 2);
}

TEST_CASE("server errors and dimension mismatches surface as transport errors") {
  stub::Server err([](const stub::Bytes&) { return stub::Reply{{'B', 'A', 'C', 'R', 1}, false}; });
  FeatureClient c1(local(err.port()));
  CHECK_THROWS_AS(c1.request(small_patch(), {false, true}), TransportError);

  stub::Server short_fc7([](const stub::Bytes&) {
    stub::Bytes out = stub::ok_header();
    const auto s = fc7_section(100);
    out.insert(out.end(), s.begin(), s.end());
    return stub::Reply{out, false};
  });
  FeatureClient c2(local(short_fc7.port()));
  CHECK_THROWS_AS(c2.request(small_patch(), {false, true}), TransportError);
}

TEST_CASE("unreachable server raises") {
  std::uint16_t port = 0;
  {
    stub::Server s(honest);
    port = s.port();
  }
  FeatureClient client(local(port));
  CHECK_THROWS_AS(client.request(small_patch(), {true, false}), TransportError);
}

TEST_CASE("endpoint parsing") {
  const Endpoint e = Endpoint::parse("localhost:5005");
  CHECK(e.host == "localhost");
  CHECK(e.port == 5005);
  CHECK(e.str() == "localhost:5005");
  CHECK_THROWS_AS(Endpoint::parse("localhost"), ParameterError);
  CHECK_THROWS_AS(Endpoint::parse("host:0"), ParameterError);
  CHECK_THROWS_AS(Endpoint::parse("host:70000"), ParameterError);
  CHECK_THROWS_AS(Endpoint::parse("host:12x"), ParameterError);
  CHECK_THROWS_AS(Endpoint::parse(":80"), ParameterError);
}

TEST_CASE("remote provider asks for one kind at a time") {
  stub::Server server(honest);
  RemoteProvider provider(local(server.port()));
  check_conv(provider.conv_features(small_patch()));
  check_fc7(provider.descriptor(small_patch()));
  CHECK(provider.descriptor_input_size() == 224);
  const auto reqs = server.requests();
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[0][5] == 1);
  CHECK(reqs[1][5] == 2);
}
