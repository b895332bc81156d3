// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
//
// Umbrella header. The runtime and snapshot engine are split across headers
// that complete each other's definitions, so include this one.
#pragma once

#include "snapactor/errors.hpp"
#include "snapactor/ref.hpp"
#include "snapactor/types.hpp"
#include "snapactor/value.hpp"
#include "snapactor/buffer.hpp"
#include "snapactor/format.hpp"
#include "snapactor/runtime.hpp"
#include "snapactor/capture.hpp"
#include "snapactor/restore.hpp"
