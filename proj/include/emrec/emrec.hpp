#ifndef EMREC_EMREC_HPP
#define EMREC_EMREC_HPP

#include "emrec/config.hpp"
#include "emrec/conv.hpp"
#include "emrec/csv.hpp"
#include "emrec/denoiser.hpp"
#include "emrec/geometry.hpp"
#include "emrec/image_io.hpp"
#include "emrec/io_common.hpp"
#include "emrec/metrics.hpp"
#include "emrec/model_io.hpp"
#include "emrec/nlm_admm.hpp"
#include "emrec/phantom.hpp"
#include "emrec/pipeline.hpp"
#include "emrec/projector.hpp"
#include "emrec/recon.hpp"
#include "emrec/rng.hpp"
#include "emrec/simulate.hpp"
#include "emrec/tv_pdhg.hpp"

#endif
