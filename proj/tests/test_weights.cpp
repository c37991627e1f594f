// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <sstream>

#include "cnnlab/weights.hpp"
#include "support.hpp"

using namespace cnnlab;
using cnnlab::testing::contains;
using cnnlab::testing::error_message;

namespace {

NetworkModel small_model() {
  return parse_model(R"({"name": "small", "layers": [
    {"type": "conv", "name": "c", "input": [2, 4, 4], "kernel": [3, 2, 3, 3], "stride": 1,
     "pad": [1, 1, 1, 1], "activation": "relu"},
    {"type": "pool", "name": "p", "input": [3, 4, 4], "window": [2, 2], "stride": 2, "pool": "max"},
    {"type": "fc", "name": "f", "input": [3, 2, 2], "out": 5, "mode": "softmax"}]})");
}

}  // namespace

TEST_CASE("seeded initialization is deterministic and in range") {
  const NetworkModel m = small_model();
  const WeightSet a = init_weights(m, 42);
  const WeightSet b = init_weights(m, 42);
  const WeightSet c = init_weights(m, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  REQUIRE(a.blobs.size() == 4);
  CHECK(a.blobs[0].kind == BlobKind::conv_kernel);
  CHECK(a.blobs[0].values.size() == 54);
  CHECK(a.blobs[1].values.size() == 3);
  CHECK(a.blobs[2].layer == 2);
  CHECK(a.blobs[2].values.size() == 60);
  CHECK(a.find(1, BlobKind::conv_kernel) == nullptr);
  for (const auto& blob : a.blobs) {
    for (float v : blob.values) {
      CHECK(v >= -0.05f);
      CHECK(v <= 0.05f);
    }
  }
  const auto x = seeded_input(m, 7);
  CHECK(x.size() == 32);
  for (float v : x) {
    CHECK(v >= 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("uniform source follows the standard engine") {
  // The first raw output of mt19937 seeded with 5489 is fixed by the standard.
  UniformSource s(5489);
  CHECK(s.next(0.0f, 1.0f) == static_cast<float>((3499211612u >> 8) * 0x1p-24));
  UniformSource wide(123);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) sum += wide.next(0.0f, 1.0f);
  CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("weights file round trip") {
  const WeightSet w = init_weights(small_model(), 1);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  write_weights(buf, w);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "CNNL");
  std::size_t expected = 12;
  for (const auto& b : w.blobs) expected += 4 + 1 + 8 + 4 * b.values.size();
  CHECK(bytes.size() == expected);
  CHECK(read_weights(buf) == w);
}

TEST_CASE("weights file errors") {
  std::stringstream bad("XXXX");
  CHECK(contains(error_message([&] { read_weights(bad); }), "bad magic"));
  const WeightSet w = init_weights(small_model(), 1);
  std::stringstream full;
  write_weights(full, w);
  std::stringstream truncated(full.str().substr(0, full.str().size() - 3));
  CHECK(contains(error_message([&] { read_weights(truncated); }), "truncated"));
  std::string wrong_version = full.str();
  wrong_version[4] = 9;
  std::stringstream v(wrong_version);
  CHECK(contains(error_message([&] { read_weights(v); }), "unsupported weights version 9"));
  CHECK_THROWS_AS(load_weights_file("/nonexistent/weights.bin"), Error);
}

TEST_CASE("blob sizes follow the layer tuples") {
  const NetworkModel m = load_model_file(testing::data_path("models/alexnet8.model"));
  CHECK(expected_blob_size(m.layers[5].spec, BlobKind::fc_matrix) == 9216u * 4096u);
  CHECK(expected_blob_size(m.layers[0].spec, BlobKind::conv_kernel) == 96u * 3u * 11u * 11u);
  CHECK_THROWS_AS(expected_blob_size(m.layers[0].spec, BlobKind::fc_bias), Error);
}
