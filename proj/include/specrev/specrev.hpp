#ifndef SPECREV_SPECREV_HPP
#define SPECREV_SPECREV_HPP

// Everything except the HTTP layer (specrev/service.hpp).
#include "specrev/batch.hpp"
#include "specrev/document.hpp"
#include "specrev/environment.hpp"
#include "specrev/graph.hpp"
#include "specrev/learning.hpp"
#include "specrev/metrics.hpp"
#include "specrev/polytope.hpp"
#include "specrev/report.hpp"
#include "specrev/session.hpp"
#include "specrev/user_model.hpp"

#endif  // SPECREV_SPECREV_HPP
