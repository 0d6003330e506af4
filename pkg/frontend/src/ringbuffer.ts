/** Fixed-capacity FIFO; pushing past capacity drops the oldest entry.
 * Keeps dashboard memory flat no matter how long the session runs. */
export class RingBuffer<T> {
  private items: T[] = [];
  private start = 0;

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("capacity must be positive");
  }

  push(item: T): void {
    if (this.items.length < this.capacity) {
      this.items.push(item);
      return;
    }
    this.items[this.start] = item;
    this.start = (this.start + 1) % this.capacity;
  }

  get length(): number {
    return this.items.length;
  }

  last(): T | undefined {
    if (this.items.length === 0) return undefined;
    if (this.items.length < this.capacity) return this.items[this.items.length - 1];
    return this.items[(this.start + this.capacity - 1) % this.capacity];
  }

  toArray(): T[] {
    if (this.items.length < this.capacity) return this.items.slice();
    return this.items.slice(this.start).concat(this.items.slice(0, this.start));
  }
}
