"""Exception types shared across the pipeline stages."""


class HinError(Exception):
    """Base class for all errors raised by this package."""


# --- loading -------------------------------------------------------------

class MalformedLine(HinError):
    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class DanglingFeature(HinError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"feature row for unknown node {node!r}")


class DanglingLabel(HinError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"label row for unknown node {node!r}")


class EmptyGraph(HinError):
    pass


class UnknownNode(HinError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"unknown node {node!r}")


class UnknownRelation(HinError):
    def __init__(self, relation):
        self.relation = relation
        super().__init__(f"unknown relation {relation!r}")


# --- partitioning --------------------------------------------------------

class NoBuckets(HinError):
    pass


class NoCrossPartitionNodes(HinError):
    """Partitions share no nodes and no inter-partition edges."""


class DegenerateDenominator(HinError):
    """Neighborhood-loss denominator is not positive."""


# --- numerics ------------------------------------------------------------

class ShapeMismatch(HinError):
    pass


class NonFinite(HinError):
    pass


class NonFiniteLoss(HinError):
    def __init__(self, partition_id, epoch, loss):
        self.partition_id = partition_id
        self.epoch = epoch
        self.loss = loss
        super().__init__(
            f"non-finite loss {loss!r} in worker for partition "
            f"{partition_id} at epoch {epoch}"
        )


class TooFewAnchors(HinError):
    def __init__(self, count):
        self.count = count
        super().__init__(f"cannot fit an alignment map from {count} anchor pairs")


class EmptyContextList(HinError):
    pass


# --- evaluation ----------------------------------------------------------

class InsufficientLabels(HinError):
    pass


class TooFewEdges(HinError):
    pass


# --- orchestration -------------------------------------------------------

class PipelineError(HinError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
