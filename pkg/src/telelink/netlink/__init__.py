"""Message protocol, wire codec and simulated link."""

from .channel import (BandwidthMeter, Channel, ChannelModel, bandwidth_meter, channel_poll,
                      channel_send)
from .codec import (LEFT, MSG_TYPES, OVERHEAD, RIGHT, ArmStateFeedback, BadMagic,
                    BaseVelocityCmd, CodecError, CrcMismatch, DecodeError, Decoded, EefPoseCmd,
                    EncodeError, ErrorState, FaceKeypoints, HandCurrentFeedback, HandJointCmd,
                    HeadPoseCmd, MalformedPayload, Message, TrailingBytes, TruncatedFrame,
                    UnknownMessageType, VideoFrame, WrenchFeedback, decode, encode, iter_frames)

__all__ = [
    "ArmStateFeedback", "BadMagic", "BandwidthMeter", "BaseVelocityCmd", "Channel",
    "ChannelModel", "CodecError", "CrcMismatch", "DecodeError", "Decoded", "EefPoseCmd",
    "EncodeError", "ErrorState", "FaceKeypoints", "HandCurrentFeedback", "HandJointCmd",
    "HeadPoseCmd", "LEFT", "MSG_TYPES", "MalformedPayload", "Message", "OVERHEAD", "RIGHT",
    "TrailingBytes", "TruncatedFrame", "UnknownMessageType", "VideoFrame", "WrenchFeedback",
    "bandwidth_meter", "channel_poll", "channel_send", "decode", "encode", "iter_frames",
]
