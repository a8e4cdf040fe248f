#pragma once

#include <stdexcept>
#include <string>

namespace mgmt {

/// Base of every error raised by the library. Callers that only care about
/// "did this case fail" catch this; the subclasses carry the category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// nifti_io
class FormatError : public Error { public: using Error::Error; };
class UnsupportedTypeError : public Error { public: using Error::Error; };
class TruncationError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };
class OrientationError : public Error { public: using Error::Error; };

// volume_ops / phantom_gen
class GeometryError : public Error { public: using Error::Error; };

// mask_geometry
class BoundsError : public Error { public: using Error::Error; };
class LabelError : public Error { public: using Error::Error; };
class NoTumorError : public Error { public: using Error::Error; };

// multiview_model
class ShapeError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };

// metrics_eval
class DegenerateLabelsError : public Error { public: using Error::Error; };
class BootstrapDegenerateError : public Error { public: using Error::Error; };

// cli configuration / manifest problems (exit code 2)
class ConfigError : public Error { public: using Error::Error; };

} // namespace mgmt
