#pragma once

#include "hlsalign/error.hpp"
#include "hlsalign/parallel.hpp"
#include "hlsalign/format.hpp"
#include "hlsalign/raster.hpp"
#include "hlsalign/raster_io.hpp"
#include "hlsalign/radiometry.hpp"
#include "hlsalign/dataset.hpp"
#include "hlsalign/align.hpp"
#include "hlsalign/resample.hpp"
#include "hlsalign/metrics.hpp"
#include "hlsalign/evaluate.hpp"
#include "hlsalign/synth.hpp"
#include "hlsalign/config.hpp"
#include "hlsalign/commands.hpp"
