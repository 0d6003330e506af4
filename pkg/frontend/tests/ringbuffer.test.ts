import { describe, expect, it } from "vitest";

import { RingBuffer } from "../src/ringbuffer";

describe("RingBuffer", () => {
  it("holds items in insertion order below capacity", () => {
    const buffer = new RingBuffer<number>(5);
    buffer.push(1);
    buffer.push(2);
    buffer.push(3);
    expect(buffer.toArray()).toEqual([1, 2, 3]);
    expect(buffer.length).toBe(3);
    expect(buffer.last()).toBe(3);
  });

  it("drops the oldest entry once full", () => {
    const buffer = new RingBuffer<number>(3);
    for (const value of [1, 2, 3, 4, 5]) buffer.push(value);
    expect(buffer.toArray()).toEqual([3, 4, 5]);
    expect(buffer.length).toBe(3);
    expect(buffer.last()).toBe(5);
  });

  it("never grows past capacity regardless of push count", () => {
    const buffer = new RingBuffer<number>(600);
    for (let i = 0; i < 100_000; i++) buffer.push(i);
    expect(buffer.length).toBe(600);
    expect(buffer.toArray()[0]).toBe(99_400);
    expect(buffer.last()).toBe(99_999);
  });

  it("rejects non-positive capacity", () => {
    expect(() => new RingBuffer(0)).toThrow();
  });
});
