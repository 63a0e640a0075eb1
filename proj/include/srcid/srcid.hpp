#pragma once

#include "srcid/errors.hpp"
#include "srcid/fem.hpp"
#include "srcid/forward.hpp"
#include "srcid/inverse.hpp"
#include "srcid/linalg.hpp"
#include "srcid/mesh.hpp"
#include "srcid/spectrum.hpp"
