"""qkc: kernel correlation registration with a simulated Ising Born machine"""

__version__ = '0.1.0'
