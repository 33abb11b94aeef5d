#ifndef TRANSMIX_TRANSMIX_HPP
#define TRANSMIX_TRANSMIX_HPP

#include "transmix/errors.hpp"
#include "transmix/numeric.hpp"
#include "transmix/rng.hpp"
#include "transmix/parallel.hpp"
#include "transmix/model.hpp"
#include "transmix/ecf.hpp"
#include "transmix/contrast.hpp"
#include "transmix/optim.hpp"
#include "transmix/estimate.hpp"
#include "transmix/inference.hpp"
#include "transmix/density.hpp"
#include "transmix/simulate.hpp"
#include "transmix/io.hpp"
#include "transmix/config.hpp"
#include "transmix/pipeline.hpp"
#include "transmix/report.hpp"

#endif  // TRANSMIX_TRANSMIX_HPP
