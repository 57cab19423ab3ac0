"""Quaternions, compact matrix groups and their Lie algebras."""
from .groups import (
    AlgebraVector,
    GroupElement,
    GroupTagError,
    algebra_basis,
    algebra_dim,
    bracket,
    conjugate,
    distance,
    exp_algebra,
    from_coords,
    haar_batch,
    haar_sample,
    identity,
    inner_q,
    inverse,
    multiply,
    parse_group,
    q_norm,
    random_algebra,
    s3,
    s3xs3,
    skew_residual,
    sp2_column_residual,
    sp2_from_columns,
    to_coords,
    unitarity_residual,
)
from .quaternion import (
    ONE,
    I,
    J,
    K,
    Quaternion,
    left_matrix,
    qconj,
    qconjugate_by,
    qexp,
    qimag,
    qinv,
    qmul,
    qnorm,
    qnormalize,
    qpow,
    qreal,
    right_matrix,
)
