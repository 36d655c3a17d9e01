"""Exception hierarchy shared by all ffs3d modules."""


class FFSError(Exception):
    """Base class for every error raised by ffs3d."""


class KittiIOError(FFSError, OSError):
    """A KITTI file is missing or unreadable."""


class FormatError(FFSError, ValueError):
    """A file does not follow the expected KITTI layout."""


class ValidationError(FFSError, ValueError):
    """Parsed values violate a domain invariant."""


class FrameError(FFSError, ValueError):
    """A point cloud is in the wrong coordinate frame for the operation."""


class DegenerateBoxError(ValidationError):
    """A 2D box has zero or negative width/height."""


class SmearTwiceError(FFSError, RuntimeError):
    """Neighbor smearing was applied to an already smeared histogram."""


class EmptyFrustumError(FFSError):
    """The frustum contains no points, so no density peak exists."""


class InvalidCenterError(FFSError, ValueError):
    """A RoI center lies outside the frustum's [near, far] interval."""
