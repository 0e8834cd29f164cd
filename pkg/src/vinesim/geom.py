"""Small SO(3) toolbox for the rigid-segment chain.

Joint rotations are parametrized by a rotation vector restricted to the
cross-section plane, w = (wx, wy, 0). exp_so3 maps it to a rotation matrix,
left_jacobian supplies the exact derivative of that map, which is what the
energy gradient needs:

    d(R(w) v)/dw_k = (J_l(w) e_k) x (R(w) v)
"""

import numpy as np


def hat(v):
    """Skew-symmetric cross-product matrix of a 3-vector."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def exp_so3(w):
    """Rodrigues rotation from a rotation vector (3,)."""
    th = np.linalg.norm(w)
    K = hat(w)
    if th < 1e-10:
        # second-order series keeps this exact to machine precision here
        return np.eye(3) + K + 0.5 * (K @ K)
    return np.eye(3) + (np.sin(th) / th) * K + ((1.0 - np.cos(th)) / th ** 2) * (K @ K)


def left_jacobian(w):
    """Left Jacobian of exp_so3 (the SO(3) J_l)."""
    th = np.linalg.norm(w)
    K = hat(w)
    if th < 1e-6:
        return np.eye(3) + 0.5 * K + (K @ K) / 6.0
    A = (1.0 - np.cos(th)) / th ** 2
    B = (th - np.sin(th)) / th ** 3
    return np.eye(3) + A * K + B * (K @ K)


def planar_rotation(theta):
    """Rotation by theta about the +y axis (the default bending plane is x-z)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([
        [c, 0.0, s],
        [0.0, 1.0, 0.0],
        [-s, 0.0, c],
    ])
