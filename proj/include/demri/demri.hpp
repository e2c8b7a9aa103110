#pragma once

#include "demri/augment.hpp"
#include "demri/classifiers.hpp"
#include "demri/clinical.hpp"
#include "demri/components.hpp"
#include "demri/core.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"
#include "demri/format.hpp"
#include "demri/glcm.hpp"
#include "demri/metrics.hpp"
#include "demri/neuralref.hpp"
#include "demri/nifti.hpp"
#include "demri/preprocess.hpp"
#include "demri/ranking.hpp"
#include "demri/report.hpp"
#include "demri/scarseg.hpp"
