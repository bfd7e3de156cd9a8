"""SIP privacy toolkit: user and network privacy functions plus a VoIP peering simulator."""

__version__ = '0.1.0'
