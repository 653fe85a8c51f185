"""Tests for AI agent."""
