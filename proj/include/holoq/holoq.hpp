// holoq.hpp: umbrella header

#pragma once

#include "holoq/adiabatic.hpp"
#include "holoq/errors.hpp"
#include "holoq/geophase.hpp"
#include "holoq/models.hpp"
#include "holoq/path.hpp"
#include "holoq/spectral.hpp"
#include "holoq/superop.hpp"
