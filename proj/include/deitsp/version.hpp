// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace deitsp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace deitsp
