#pragma once

// Typed error hierarchy. Every failure mode the library reports has its own
// type so callers (and tests) can catch precisely.

#include <stdexcept>
#include <string>

namespace lgm {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define LGM_ERROR_TYPE(Name)                                  \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& msg) : Error(msg) {}     \
  };

// data validation
LGM_ERROR_TYPE(MissingValue)
LGM_ERROR_TYPE(UnknownRegion)
LGM_ERROR_TYPE(NonPositiveTime)
LGM_ERROR_TYPE(NoEvents)
LGM_ERROR_TYPE(EmptyDataset)

// graph / precision structure
LGM_ERROR_TYPE(AsymmetricEdge)
LGM_ERROR_TYPE(DuplicateRegion)
LGM_ERROR_TYPE(BadIndex)
LGM_ERROR_TYPE(PhiOutOfRange)

// likelihood kernels
LGM_ERROR_TYPE(NonPositiveShape)
LGM_ERROR_TYPE(QuadratureFailure)

// approximation engine
LGM_ERROR_TYPE(NonConvergence)
LGM_ERROR_TYPE(SingularPrecision)
LGM_ERROR_TYPE(ModeSearchFailure)
LGM_ERROR_TYPE(GridExplosion)
LGM_ERROR_TYPE(EmptyGrid)

// model scores
LGM_ERROR_TYPE(InsufficientDraws)

// reference sampler
LGM_ERROR_TYPE(GuardRailExceeded)
LGM_ERROR_TYPE(DegenerateProposal)

// command line / artifacts
LGM_ERROR_TYPE(BadConfig)
LGM_ERROR_TYPE(UnknownCovariate)
LGM_ERROR_TYPE(MissingFitArtifact)

#undef LGM_ERROR_TYPE

}  // namespace lgm
