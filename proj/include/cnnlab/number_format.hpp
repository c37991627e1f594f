// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace cnnlab {

/// Six significant digits in plain positional notation ("0.0000754975",
/// "1329.54", "123457000"), trailing fractional zeros dropped. Independent of
/// the process locale.
std::string format_number(double value);

}  // namespace cnnlab
