#pragma once

#include "nscheme/core.hpp"
#include "nscheme/model.hpp"
#include "nscheme/config_io.hpp"
#include "nscheme/liouvillian.hpp"
#include "nscheme/steady.hpp"
#include "nscheme/dynamics.hpp"
#include "nscheme/mcwf.hpp"
#include "nscheme/dressed.hpp"
#include "nscheme/floquet.hpp"
#include "nscheme/scan.hpp"
#include "nscheme/version.hpp"
