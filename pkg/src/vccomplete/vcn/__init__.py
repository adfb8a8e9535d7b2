"""Pose head, completion encoder, losses and the two run modes."""

from .losses import loss_chamfer, loss_geodesic, loss_smooth_l1
from .network import VcnConfig, VcnNet, init_params
from .pipeline import (ForwardTrace, PoseEstimate, TrainSample, VcnOutput, complete, loss_total, pose_head,
                       run_vcn_cn, run_vcn_vc)

__all__ = ["loss_chamfer", "loss_geodesic", "loss_smooth_l1", "VcnConfig", "VcnNet", "init_params", "ForwardTrace",
           "PoseEstimate", "TrainSample", "VcnOutput", "complete", "loss_total", "pose_head", "run_vcn_cn",
           "run_vcn_vc"]
