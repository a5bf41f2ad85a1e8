"""
Datagen Module

Synthetic hierarchical class trees and GCD splits.
"""

from .tree import TreeSpec, SyntheticGCD, GCDSplit, generate_tree, make_gcd_split, synthetic_gcd

__all__ = ['TreeSpec', 'SyntheticGCD', 'GCDSplit', 'generate_tree', 'make_gcd_split', 'synthetic_gcd']
