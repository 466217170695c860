#pragma once

#include "freeharm/contour.hpp"
#include "freeharm/error.hpp"
#include "freeharm/extend.hpp"
#include "freeharm/freegroup.hpp"
#include "freeharm/halffinite.hpp"
#include "freeharm/pdfun.hpp"
#include "freeharm/random.hpp"
#include "freeharm/realize.hpp"
#include "freeharm/spectral.hpp"

#define FREEHARM_VERSION "1.0.0"
