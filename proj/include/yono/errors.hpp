#pragma once

#include <stdexcept>
#include <string>

namespace yono {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define YONO_DEFINE_ERROR(name)                        \
  struct name : Error {                                \
    explicit name(const std::string& what) : Error(what) {} \
  }

// geometry
YONO_DEFINE_ERROR(ZeroVectorError);
YONO_DEFINE_ERROR(AntipodalAxisError);
YONO_DEFINE_ERROR(InvalidSpecError);
YONO_DEFINE_ERROR(InvalidCosineError);

// prototypes / synthesis
YONO_DEFINE_ERROR(EmptyClassError);
YONO_DEFINE_ERROR(EmptyMemoryError);
YONO_DEFINE_ERROR(DimensionMismatchError);
YONO_DEFINE_ERROR(UnknownClassError);
YONO_DEFINE_ERROR(DuplicateClassError);

// encoder / trainer
YONO_DEFINE_ERROR(ShapeMismatchError);
YONO_DEFINE_ERROR(StaleCacheError);
YONO_DEFINE_ERROR(ArchitectureMismatchError);
YONO_DEFINE_ERROR(ClassCollisionError);

// datasets / metrics
YONO_DEFINE_ERROR(IndivisibleClassesError);
YONO_DEFINE_ERROR(EmptyDatasetError);
YONO_DEFINE_ERROR(MissingTestSetError);
YONO_DEFINE_ERROR(IncompleteMatrixError);
YONO_DEFINE_ERROR(TooFewTasksError);

// io / config
YONO_DEFINE_ERROR(ParseError);
YONO_DEFINE_ERROR(IoError);
YONO_DEFINE_ERROR(ConfigError);

#undef YONO_DEFINE_ERROR

}  // namespace yono
