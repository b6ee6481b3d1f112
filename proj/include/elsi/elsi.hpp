#pragma once

#include "elsi/bessel.hpp"
#include "elsi/delaunay.hpp"
#include "elsi/errors.hpp"
#include "elsi/fem.hpp"
#include "elsi/geometry.hpp"
#include "elsi/harness.hpp"
#include "elsi/mesh.hpp"
#include "elsi/posterior.hpp"
#include "elsi/priors.hpp"
#include "elsi/rng.hpp"
#include "elsi/spectral.hpp"
#include "elsi/stats.hpp"
#include "elsi/synth.hpp"
#include "elsi/version.hpp"
